"""
HCGL CLI Analyze - Exact landscape analysis over a sigma grid.

Everything here is computed on the enumerated state space: the communication
height, the set S with its boundaries, conductance, mixing-time bounds and
exact mean hitting times between the dominant configurations.
"""

import logging
import math
from typing import Dict, List, Optional, Tuple

import numpy as np
from rich.table import Table

from hcgl_core.configuration import (
    StateSpace,
    bottom,
    dominant_mass,
    enumerate_states,
    state_space_to_document,
)
from hcgl_core.contours import ClassificationCache
from hcgl_core.schemas import (
    AnalysisSummary,
    ExperimentConfig,
    LandscapeReport,
    ReportBundle,
)
from hcgl_core.serialize import to_json
from hcgl_core.topology import build_torus

from hcgl_analyzer.chain import (
    build_chain,
    certify_mixing_bound,
    conductance_of_S,
    exact_conductance,
    mean_hitting_time,
    mixing_time_bound,
    spectral_gap,
    true_mixing_time,
)
from hcgl_analyzer.landscape import (
    SetS,
    alpha,
    bottom_gap,
    build_set_S,
    communication_height,
    depth,
    hitting_time_slope,
    is_non_trivial_cycle,
    reference_path,
    set_S_prime,
)
from hcgl_cli.common import console, fmt, new_bundle

logger = logging.getLogger(__name__)

# Dense matrix exponentials are only affordable on the 4x4 torus
TRUE_TMIX_MAX_SIDE = 4
TRUE_TMIX_MAX_SIGMA = 10.0


def landscape_at(
    space: StateSpace,
    s: SetS,
    gamma: int,
    sigma: float,
    config: ExperimentConfig,
) -> LandscapeReport:
    """
    Exact landscape quantities for one sigma.

    Hitting times and the spectral gap use the configured p and mu; the
    conductance and both mixing-time values use p = mu = 1.

    Raises:
        ConditioningError: If sigma is above the precision threshold
        IdentityViolationError: If the conductance or mixing bound fails
    """
    side = space.side
    even_id, odd_id = space.dominant_ids()
    chain = build_chain(space, nu=sigma * config.p * config.mu, p=config.p, mu=config.mu)
    e_to_o = mean_hitting_time(chain, even_id, odd_id)
    o_to_e = mean_hitting_time(chain, odd_id, even_id)

    conductance = exact_conductance(space, s, sigma)
    bound = tmix_lower = tmix_lo = tmix_hi = None
    if sigma > 1:
        conductance, bound = conductance_of_S(space, s, sigma)
        tmix_lower = mixing_time_bound(space, s, sigma, config.epsilon)
        if side <= TRUE_TMIX_MAX_SIDE and sigma <= TRUE_TMIX_MAX_SIGMA:
            unit_chain = chain if config.p == config.mu == 1 else build_chain(space, sigma=sigma)
            tmix_lo, tmix_hi = true_mixing_time(unit_chain, config.epsilon)
            certify_mixing_bound(space, (tmix_lo, tmix_hi), tmix_lower, sigma, config.epsilon)

    logger.info("sigma=%g: E T(E->O)=%.6g", sigma, e_to_o.time)
    return LandscapeReport(
        side=side,
        sigma=sigma,
        n_states=space.cardinality,
        gamma=gamma,
        set_S=s.members.tolist(),
        inner_boundary=s.inner_boundary.tolist(),
        outer_boundary=s.outer_boundary.tolist(),
        bottom_gap=bottom_gap(space, s.outer_boundary),
        depth=depth(space, s),
        is_non_trivial_cycle=is_non_trivial_cycle(space, s),
        dominant_mass=dominant_mass(chain.law),
        conductance=conductance,
        conductance_bound=bound,
        epsilon=config.epsilon,
        tmix_lower=tmix_lower,
        tmix_true_lower=tmix_lo,
        tmix_true_upper=tmix_hi,
        q_max=chain.q_max,
        spectral_gap=spectral_gap(chain),
        mean_hit_tau=e_to_o.steps,
        mean_hit_EO=e_to_o.time,
        mean_hit_OE=o_to_e.time,
    )


def summarize(
    space: StateSpace, s: SetS, reports: List[LandscapeReport], config: ExperimentConfig
) -> AnalysisSummary:
    path = reference_path(space.graph)
    peak = path.states[path.landmarks["I2"]]
    peak_id = space.state_id(peak)
    s_prime = set_S_prime(space)

    slope: Optional[float] = None
    by_sigma = sorted(reports, key=lambda r: r.sigma)
    if len(by_sigma) >= 2:
        a, b = by_sigma[-2], by_sigma[-1]
        slope = hitting_time_slope(a.sigma, a.mean_hit_EO, b.sigma, b.mean_hit_EO)

    return AnalysisSummary(
        reference_path=path.hex_states(),
        reference_peak_gap=path.peak_gap,
        reference_peak_state=peak.occupied.to_hex(),
        reference_peak_in_bottom=peak_id in bottom(space, s.outer_boundary),
        s_prime_size=int(s_prime.size),
        s_prime_disjoint=bool(np.intersect1d(s.members, s_prime).size == 0),
        alpha=alpha(config.p, config.nu),
        hitting_time_slope=slope,
    )


def cmd_analyze(config: ExperimentConfig) -> Tuple[ReportBundle, Dict[str, str]]:
    """
    Run the exact analysis for every sigma of the grid.

    The grid is ``config.sigma_grid`` or the single configured sigma.

    Returns:
        tuple: (bundle, side files)
    """
    if config.overrides is not None:
        logger.warning("per-node overrides are ignored by the exact analysis")
    g = build_torus(config.side)
    space = enumerate_states(g)
    cache = ClassificationCache(space)

    s = build_set_S(space, cache)
    even_id, odd_id = space.dominant_ids()
    gamma = communication_height(space, even_id, odd_id)

    grid = sorted(config.sigma_grid or [config.sigma])
    reports = [landscape_at(space, s, gamma, sigma, config) for sigma in grid]
    bundle = new_bundle(config, landscape=reports, analysis=summarize(space, s, reports, config))
    side_files = {"state_space.json": to_json(state_space_to_document(space))}
    return bundle, side_files


def print_analysis(bundle: ReportBundle) -> None:
    reports = bundle.landscape or []
    if not reports:
        return
    first = reports[0]
    console.print(
        f"\n[bold]L={first.side}[/bold]  |Omega|={first.n_states}  "
        f"Gamma={first.gamma}  |S|={len(first.set_S)}  "
        f"|inner|={len(first.inner_boundary)}  D(S)={first.depth}"
    )
    table = Table(title="Landscape over sigma")
    table.add_column("sigma", style="cyan")
    table.add_column("E T(E->O)", style="green")
    table.add_column("E T(O->E)", style="green")
    table.add_column("Phi(S)")
    table.add_column("bound", style="dim")
    table.add_column("t_mix lower")
    table.add_column("pi(E)+pi(O)", style="magenta")
    for r in reports:
        table.add_row(
            fmt(r.sigma),
            fmt(r.mean_hit_EO),
            fmt(r.mean_hit_OE),
            fmt(r.conductance),
            fmt(r.conductance_bound),
            fmt(r.tmix_lower),
            fmt(r.dominant_mass),
        )
    console.print(table)

    summary = bundle.analysis
    if summary is not None:
        ok = summary.reference_peak_in_bottom
        marker = "[green][OK][/green]" if ok else "[yellow][WARN][/yellow]"
        console.print(
            f"{marker} reference path: {len(summary.reference_path)} states, "
            f"peak gap {summary.reference_peak_gap}"
        )
        if summary.hitting_time_slope is not None and not math.isnan(summary.hitting_time_slope):
            console.print(f"[dim]log-log slope of E T(E->O):[/dim] {fmt(summary.hitting_time_slope)}")
