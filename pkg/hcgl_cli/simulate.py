"""
HCGL CLI Simulate - Replicated delay runs with transition-time sampling.
"""

import logging
from typing import Dict, Optional, Tuple

import numpy as np
from rich.table import Table

from hcgl_core.configuration import enumerate_states
from hcgl_core.errors import ConditioningError
from hcgl_core.schemas import ExperimentConfig, ReportBundle, SimulationAggregate
from hcgl_core.topology import ConflictGraph, build_torus

from hcgl_analyzer.chain import build_chain, mean_hitting_time, precision_sigma
from hcgl_recorder.experiments import (
    aggregate_replicas,
    run_replicas,
    sample_transition_times,
)
from hcgl_recorder.simulator import NetworkParams
from hcgl_recorder.statistics import t_interval
from hcgl_cli.common import console, fmt, new_bundle

logger = logging.getLogger(__name__)

# Exact E -> O times are solved on the 4x4 torus only
EXACT_MAX_VERTICES = 16


def exact_transition_time(params: NetworkParams, g: ConflictGraph) -> Optional[float]:
    """E T_{E->O} from the exact chain when the network is small and homogeneous."""
    if g.n_vertices > EXACT_MAX_VERTICES or not params.is_homogeneous:
        return None
    if params.sigma > precision_sigma():
        return None
    space = enumerate_states(g)
    chain = build_chain(space, nu=float(params.nu[0]), p=float(params.p[0]), mu=float(params.mu[0]))
    even_id, odd_id = space.dominant_ids()
    try:
        return mean_hitting_time(chain, even_id, odd_id).time
    except ConditioningError as e:
        logger.warning("exact transition time skipped: %s", e)
        return None


def cmd_simulate(config: ExperimentConfig) -> Tuple[ReportBundle, Dict[str, str]]:
    """
    Run ``config.replicas`` delay experiments and aggregate them.

    Replica i runs on child i of ``SeedSequence(seed)``; independent
    transition samples, when requested, use child ``replicas``.

    Raises:
        InstabilityError: If the parameters are not stable or the queue drifts

    Returns:
        tuple: (bundle, side files)
    """
    g = build_torus(config.side)
    params = NetworkParams.from_config(config, g.n_vertices)
    records, trace_text = run_replicas(
        params,
        g,
        horizon=config.horizon,
        warmup=config.warmup,
        replicas=config.replicas,
        seed=config.seed,
        jobs=config.jobs,
        trace=config.trace,
    )
    aggregate = aggregate_replicas(records, params, config.side)

    if config.n_samples > 0:
        child = np.random.SeedSequence(config.seed).spawn(config.replicas + 1)[config.replicas]
        samples = sample_transition_times(
            params, g, config.n_samples, np.random.default_rng(child), config.max_events
        )
        if samples.e_to_o:
            aggregate.sampled_e_to_o = t_interval(samples.e_to_o)
        if samples.o_to_e:
            aggregate.sampled_o_to_e = t_interval(samples.o_to_e)
        aggregate.censored_samples = samples.censored
    aggregate.exact_e_to_o = exact_transition_time(params, g)

    bundle = new_bundle(config, simulation=aggregate, replica_records=records)
    side_files = {"trace.csv": trace_text} if trace_text is not None else {}
    return bundle, side_files


def print_simulation(aggregate: SimulationAggregate) -> None:
    def interval(ci) -> str:
        if ci is None:
            return "-"
        return f"{fmt(ci.mean)} +/- {fmt(ci.half_width)} (n={ci.n})"

    table = Table(title=f"Simulation L={aggregate.side} sigma={fmt(aggregate.sigma)} "
                        f"rho={fmt(aggregate.rho)} ({aggregate.replicas} replica(s))")
    table.add_column("Quantity", style="cyan")
    table.add_column("Estimate", style="green")
    table.add_row("E L (tagged)", interval(aggregate.mean_queue))
    table.add_row("E W (tagged)", interval(aggregate.mean_delay))
    table.add_row("E T(E->O)", interval(aggregate.mean_transition_e_to_o))
    table.add_row("E T(O->E)", interval(aggregate.mean_transition_o_to_e))
    table.add_row("E W / E T(E->O)", interval(aggregate.delay_ratio))
    table.add_row("1/(4 - 2 rho)", fmt(aggregate.delay_ratio_bound))
    table.add_row("Z time average", interval(aggregate.z_time_average))
    if aggregate.sampled_e_to_o is not None:
        table.add_row("sampled T(E->O)", interval(aggregate.sampled_e_to_o))
    if aggregate.exact_e_to_o is not None:
        table.add_row("exact E T(E->O)", fmt(aggregate.exact_e_to_o))
    console.print(table)

    if aggregate.little_consistent:
        console.print("[green][OK][/green] Little's law holds within the interval")
    else:
        console.print(
            f"[yellow][WARN][/yellow] Little's law residual {fmt(aggregate.little_residual)} "
            f"exceeds {fmt(aggregate.little_half_width)}"
        )
    if aggregate.censored_samples:
        console.print(f"[yellow][WARN][/yellow] {aggregate.censored_samples} censored sample(s)")
