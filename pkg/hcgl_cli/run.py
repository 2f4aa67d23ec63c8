"""
HCGL CLI Run - The single experiment command.

``hcgl run --mode analyze|audit|simulate|sweep`` assembles one validated
config from the flags, runs the mode, writes the report directory when
``--out`` is given and prints a summary (or the bundle with ``--json``).
"""

from enum import Enum
from pathlib import Path
from typing import Optional

import typer

from hcgl_core.errors import IdentityViolationError
from hcgl_cli.common import build_config, emit_bundle, guarded, setup_logging


class Mode(str, Enum):
    ANALYZE = "analyze"
    AUDIT = "audit"
    SIMULATE = "simulate"
    SWEEP = "sweep"


def run(
    mode: Mode = typer.Option(Mode.ANALYZE, "--mode", "-m", help="Experiment to run"),
    side: Optional[int] = typer.Option(None, "--L", "-L", help="Torus side (even, >= 4)"),
    sigma: Optional[float] = typer.Option(None, "--sigma", help="Activity factor nu/(p mu)"),
    nu: Optional[float] = typer.Option(None, "--nu", help="Activation rate"),
    p: Optional[float] = typer.Option(None, "--p", help="Back-off probability"),
    mu: Optional[float] = typer.Option(None, "--mu", help="Completion rate"),
    rho: Optional[float] = typer.Option(None, "--rho", help="Load 2 lambda/mu"),
    lam: Optional[float] = typer.Option(None, "--lambda", help="Arrival rate per node"),
    horizon: Optional[float] = typer.Option(None, "--horizon", help="Simulated time per replica"),
    warmup: Optional[float] = typer.Option(None, "--warmup", help="Discarded initial time"),
    replicas: Optional[int] = typer.Option(None, "--replicas", help="Independent replicas"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Root random seed"),
    epsilon: Optional[float] = typer.Option(None, "--epsilon", help="TV level for t_mix"),
    n_samples: Optional[int] = typer.Option(
        None, "--samples", help="Transition-time samples per direction"
    ),
    max_events: Optional[int] = typer.Option(
        None, "--max-events", help="Censoring cap per transition sample"
    ),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Report directory"),
    trace: bool = typer.Option(False, "--trace", help="Write trace.csv for replica 0"),
    sigma_grid: Optional[str] = typer.Option(None, "--sigma-grid", help="Comma list of sigmas"),
    rho_grid: Optional[str] = typer.Option(None, "--rho-grid", help="Comma list of rhos"),
    params_file: Optional[Path] = typer.Option(
        None, "--params-file", help="JSON per-node parameter overrides"
    ),
    jobs: Optional[int] = typer.Option(None, "--jobs", "-j", help="Parallel workers (-1: all)"),
    log_level: str = typer.Option("WARNING", "--log-level", help="Library log level"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Print tracebacks"),
    json_output: bool = typer.Option(False, "--json", help="Print the bundle as JSON"),
):
    """
    Run an experiment and write a reproducible report bundle.
    """
    with guarded(verbose):
        setup_logging(log_level)
        config = build_config(
            mode.value,
            side=side,
            sigma=sigma,
            nu=nu,
            p=p,
            mu=mu,
            rho=rho,
            lam=lam,
            horizon=horizon,
            warmup=warmup,
            replicas=replicas,
            seed=seed,
            epsilon=epsilon,
            n_samples=n_samples,
            max_events=max_events,
            out=str(out) if out is not None else None,
            trace=trace or None,
            sigma_grid=sigma_grid,
            rho_grid=rho_grid,
            params_file=params_file,
            jobs=jobs,
        )

        if config.mode == "analyze":
            from hcgl_cli.analyze import cmd_analyze, print_analysis

            bundle, side_files = cmd_analyze(config)
            emit_bundle(config, bundle, side_files, json_output)
            if not json_output:
                print_analysis(bundle)

        elif config.mode == "audit":
            from hcgl_cli.audit import cmd_audit, print_audit

            bundle, side_files, auditor = cmd_audit(config)
            emit_bundle(config, bundle, side_files, json_output)
            if not json_output:
                print_audit(auditor)
            if auditor.findings:
                raise IdentityViolationError(auditor.findings)

        elif config.mode == "simulate":
            from hcgl_cli.simulate import cmd_simulate, print_simulation

            bundle, side_files = cmd_simulate(config)
            emit_bundle(config, bundle, side_files, json_output)
            if not json_output:
                print_simulation(bundle.simulation)

        else:
            from hcgl_cli.sweep import cmd_sweep, print_sweep

            bundle, side_files = cmd_sweep(config)
            emit_bundle(config, bundle, side_files, json_output)
            if not json_output:
                print_sweep(bundle.sweep)
