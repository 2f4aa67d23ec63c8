"""
HCGL CLI Sweep - One table row per grid point over sigma or rho.

Rows run concurrently through joblib; a row that fails keeps its error
message and the sweep carries on.
"""

import csv
import io
import logging
import math
from typing import Dict, List, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed
from rich.table import Table

from hcgl_core.configuration import StateSpace, dominant_mass, enumerate_states
from hcgl_core.errors import ConditioningError, ConfigError, HcglError
from hcgl_core.schemas import SWEEP_COLUMNS, ExperimentConfig, ReportBundle, SweepRow
from hcgl_core.serialize import normalize_value
from hcgl_core.topology import build_torus

from hcgl_analyzer.chain import build_chain, mean_hitting_time
from hcgl_analyzer.landscape import SetS, build_set_S
from hcgl_recorder.experiments import (
    aggregate_replicas,
    delay_ratio_bound,
    run_replicas,
    sample_transition_times,
)
from hcgl_recorder.simulator import NetworkParams, Stability, stability_probe
from hcgl_cli.common import console, default_sigma_grid, fmt, new_bundle
from hcgl_cli.simulate import EXACT_MAX_VERTICES

logger = logging.getLogger(__name__)


def _exact_columns(
    space: StateSpace, s: SetS, sigma: float, p: float, mu: float
) -> Dict[str, Optional[float]]:
    side = space.side
    chain = build_chain(space, nu=sigma * p * mu, p=p, mu=mu)
    even_id, odd_id = space.dominant_ids()
    columns: Dict[str, Optional[float]] = {
        "dominant_mass": dominant_mass(chain.law),
        "theta": float(chain.law.probabilities @ space.sizes) / space.graph.n_vertices,
        "conductance_bound": None,
        "mean_transition_time": None,
    }
    if sigma > 1:
        columns["conductance_bound"] = (
            s.inner_boundary.size * (side * side / 2 - side) / sigma ** side
        )
    try:
        columns["mean_transition_time"] = mean_hitting_time(chain, even_id, odd_id).time
    except ConditioningError as e:
        logger.info("sigma=%g: exact transition time refused (%s)", sigma, e)
    return columns


def sweep_row(
    axis: str,
    sigma: float,
    rho: Optional[float],
    config: ExperimentConfig,
    space: Optional[StateSpace] = None,
    s: Optional[SetS] = None,
) -> SweepRow:
    """
    Compute one sweep row.

    Exact columns need an enumerated ``space`` and its set ``s``; without
    them the transition time is sampled (``config.n_samples`` per
    direction) and theta comes from the simulation. The delay is simulated
    only when ``rho`` is set and the parameters are stable.
    """
    row = SweepRow(axis=axis, sigma=sigma, rho=rho)
    try:
        g = build_torus(config.side)
        lam = rho * config.mu / 2 if rho is not None else 0.0
        params = NetworkParams.homogeneous(
            g.n_vertices, lam=lam, mu=config.mu, nu=sigma * config.p * config.mu, p=config.p
        )
        if rho is not None:
            row.delay_ratio_bound = delay_ratio_bound(rho)
            row.stability = stability_probe(params).value

        if space is not None and s is not None:
            for name, value in _exact_columns(space, s, sigma, config.p, config.mu).items():
                setattr(row, name, value)
        if row.mean_transition_time is None and config.n_samples > 0:
            rng = np.random.default_rng(np.random.SeedSequence(config.seed))
            samples = sample_transition_times(params, g, config.n_samples, rng, config.max_events)
            if samples.e_to_o:
                row.mean_transition_time = float(np.mean(samples.e_to_o))
        if row.mean_transition_time is not None:
            row.log_mean_transition_time = math.log(row.mean_transition_time)

        if row.stability == Stability.STABLE.value:
            records, _ = run_replicas(
                params, g, config.horizon, config.warmup, config.replicas, config.seed
            )
            aggregate = aggregate_replicas(records, params, config.side)
            row.mean_delay = aggregate.mean_delay.mean
            if row.theta is None:
                row.theta = float(np.mean(aggregate.theta))
    except HcglError as e:
        logger.warning("sweep row sigma=%g rho=%s failed: %s", sigma, rho, e)
        row.error = str(e)
    return row


def sweep_points(config: ExperimentConfig) -> Tuple[str, List[Tuple[float, Optional[float]]]]:
    """
    (axis, [(sigma, rho), ...]) for the configured sweep.

    A rho grid sweeps rho at the configured sigma; otherwise sigma is swept
    over ``config.sigma_grid`` or the default grid around the threshold.
    """
    if config.rho_grid is not None:
        if config.sigma_grid is not None:
            raise ConfigError("give either --sigma-grid or --rho-grid, not both")
        return "rho", [(config.sigma, rho) for rho in config.rho_grid]
    grid = config.sigma_grid or default_sigma_grid(config.rho)
    return "sigma", [(sigma, config.rho) for sigma in sorted(grid)]


def rows_to_csv(rows: List[SweepRow]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        data = normalize_value(row.model_dump())
        writer.writerow({k: "" if data[k] is None else data[k] for k in SWEEP_COLUMNS})
    return buffer.getvalue()


def cmd_sweep(config: ExperimentConfig) -> Tuple[ReportBundle, Dict[str, str]]:
    """
    Run every grid point and collect the rows in grid order.

    Returns:
        tuple: (bundle, side files with sweep.csv)
    """
    axis, points = sweep_points(config)
    g = build_torus(config.side)
    space = s = None
    if g.n_vertices <= EXACT_MAX_VERTICES:
        space = enumerate_states(g)
        s = build_set_S(space, check_classes=False)

    logger.info("sweeping %d %s points with %d job(s)", len(points), axis, config.jobs)
    rows = Parallel(n_jobs=config.jobs)(
        delayed(sweep_row)(axis, sigma, rho, config, space, s) for sigma, rho in points
    )
    bundle = new_bundle(config, sweep=rows)
    return bundle, {"sweep.csv": rows_to_csv(rows)}


def print_sweep(rows: List[SweepRow]) -> None:
    table = Table(title=f"Sweep over {rows[0].axis if rows else '-'}")
    table.add_column("sigma", style="cyan")
    table.add_column("rho", style="cyan")
    table.add_column("stability")
    table.add_column("E T(E->O)", style="green")
    table.add_column("E W", style="green")
    table.add_column("pi(E)+pi(O)", style="magenta")
    table.add_column("error", style="red")
    for r in rows:
        table.add_row(
            fmt(r.sigma),
            fmt(r.rho),
            r.stability or "-",
            fmt(r.mean_transition_time),
            fmt(r.mean_delay),
            fmt(r.dominant_mass),
            r.error or "",
        )
    console.print(table)
