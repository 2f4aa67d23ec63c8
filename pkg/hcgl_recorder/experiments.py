"""
HCGL Recorder Experiments - Transition sampling, delay runs and renewal statistics.

A delay run follows one tagged odd node through [0, horizon]. Time averages,
delays and renewal cycles only count what happens after ``warmup``; a cycle
opens at a first entrance to E and closes at the next one, with its odd
period starting at the first entrance to O in between.
"""

import csv
import io
import logging
import math
from typing import List, NamedTuple, Optional, Sequence, TextIO, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from scipy import stats as sp_stats

from hcgl_core.configuration import ActivityLaw, StateSpace
from hcgl_core.errors import InstabilityError, PreconditionError
from hcgl_core.schemas import (
    ConfidenceInterval,
    CycleRecord,
    RenewalSummary,
    SimulationAggregate,
    SimulationRecord,
)
from hcgl_core.topology import ConflictGraph, VertexSet, dominant_sets

from hcgl_recorder.simulator import (
    EventEngine,
    EventKind,
    NetworkParams,
    SimState,
    Stability,
    stability_probe,
    stability_threshold,
)
from hcgl_recorder.statistics import (
    ratio_interval,
    ratio_of_means_interval,
    t_interval,
)

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["time", "node", "event", "queue_change"]
TRACE_ROW_LIMIT = 1_000_000
N_BATCHES = 10
MIN_RENEWAL_CYCLES = 30
DRIFT_P_VALUE = 1e-6
DRIFT_ARRIVAL_SHARE = 0.25
CHI_SQUARE_BATCHES = 20


class TransitionSamples(NamedTuple):
    e_to_o: List[float]
    o_to_e: List[float]
    censored_e_to_o: int
    censored_o_to_e: int

    @property
    def censored(self) -> int:
        return self.censored_e_to_o + self.censored_o_to_e


class ChiSquareResult(NamedTuple):
    statistic: float
    p_value: float
    n_samples: int
    n_bins: int
    raw_statistic: float
    design_effect: float


class LittleCheck(NamedTuple):
    residual: float
    half_width: float
    consistent: bool


def _first_passage(
    g: ConflictGraph,
    params: NetworkParams,
    start: VertexSet,
    target_bits: int,
    rng: np.random.Generator,
    max_events: int,
) -> Optional[float]:
    state = SimState.initial(g, start)
    engine = EventEngine(state, params, rng)
    for _ in range(max_events):
        engine.step()
        if state.active_bits == target_bits:
            return state.clock
    return None


def sample_transition_times(
    params: NetworkParams,
    g: ConflictGraph,
    n_samples: int,
    rng: np.random.Generator,
    max_events: int = 10**10,
) -> TransitionSamples:
    """
    Independent samples of T_{E->O} and T_{O->E}.

    Each sample starts in one dominant configuration with empty queues and
    stops at the first entrance to the other; queues do not affect the
    activity process, so arrivals are switched off. A sample that needs more
    than ``max_events`` events is censored: it is counted, not averaged.

    Args:
        params: Network rates (arrival rates are ignored)
        g: Torus conflict graph
        n_samples: Samples per direction
        rng: Random stream
        max_events: Censoring cap per sample

    Returns:
        TransitionSamples
    """
    g.require_torus()
    even, odd = dominant_sets(g)
    activity = params.without_arrivals()
    found = {}
    for label, start, target in (("e_to_o", even, odd), ("o_to_e", odd, even)):
        durations, censored = [], 0
        for _ in range(n_samples):
            t = _first_passage(g, activity, start, target.bits, rng, max_events)
            if t is None:
                censored += 1
            else:
                durations.append(t)
        if censored:
            logger.warning(
                "%d of %d %s samples censored at %d events", censored, n_samples, label, max_events
            )
        found[label] = (durations, censored)
    return TransitionSamples(
        e_to_o=found["e_to_o"][0],
        o_to_e=found["o_to_e"][0],
        censored_e_to_o=found["e_to_o"][1],
        censored_o_to_e=found["o_to_e"][1],
    )


def _fluid_step(z: float, slope: float, duration: float) -> Tuple[float, float]:
    """Advance a fluid level floored at 0; returns (new level, area under it)."""
    if slope >= 0:
        z_new = z + slope * duration
        return z_new, 0.5 * (z + z_new) * duration
    empty_at = z / -slope
    if empty_at >= duration:
        z_new = z + slope * duration
        return z_new, 0.5 * (z + z_new) * duration
    return 0.0, 0.5 * z * empty_at


class _Batches:
    """Time integrals split over equal batches of [warmup, horizon]."""

    def __init__(self, warmup: float, horizon: float, n: int = N_BATCHES):
        self.warmup = warmup
        self.width = (horizon - warmup) / n
        self.totals = np.zeros(n)

    def spread(self, start: float, end: float, value: float) -> None:
        if value == 0:
            return
        n = self.totals.size
        first = min(int((start - self.warmup) / self.width), n - 1)
        last = min(int((end - self.warmup) / self.width), n - 1)
        for b in range(first, last + 1):
            lo = max(start, self.warmup + b * self.width)
            hi = min(end, self.warmup + (b + 1) * self.width)
            if hi > lo:
                self.totals[b] += value * (hi - lo)

    def index(self, t: float) -> int:
        return min(int((t - self.warmup) / self.width), self.totals.size - 1)

    def means(self) -> List[float]:
        return (self.totals / self.width).tolist()


class _NodeOccupancy:
    """
    Active and unblocked time per node after ``warmup``.

    A node can only change status when it or a neighbour turns on or off, so
    stretches are closed lazily by ``touch`` right before such an event.
    """

    def __init__(self, state: SimState, warmup: float):
        n = state.graph.n_vertices
        self.state = state
        self.warmup = warmup
        self.since = [0.0] * n
        self.active = [0.0] * n
        self.unblocked = [0.0] * n
        self._neighbors = state.graph.adjacency

    def _close(self, w: int, t: float) -> None:
        start = max(self.since[w], self.warmup)
        if t > start:
            if self.state.active_bits >> w & 1:
                self.active[w] += t - start
            elif self.state.blocked[w] == 0:
                self.unblocked[w] += t - start
        self.since[w] = t

    def touch(self, node: int, t: float) -> None:
        for w in (node, *self._neighbors[node]):
            self._close(w, t)

    def close(self, t: float) -> None:
        for w in range(len(self.since)):
            self._close(w, t)


def _require_stable(params: NetworkParams) -> Stability:
    verdict = stability_probe(params)
    if verdict is not Stability.STABLE:
        raise InstabilityError(
            f"{verdict.value}: rho={params.rho:g}, sigma={params.sigma:g}, "
            f"threshold={stability_threshold(params.rho):g}",
            verdict.value,
            {
                "rho": params.rho,
                "sigma": params.sigma,
                "threshold": stability_threshold(params.rho),
            },
        )
    return verdict


def run_delay_experiment(
    params: NetworkParams,
    g: ConflictGraph,
    horizon: float,
    warmup: float,
    rng: np.random.Generator,
    *,
    replica: int = 0,
    seed_sequence: Optional[np.random.SeedSequence] = None,
    tagged: Optional[int] = None,
    trace: Optional[TextIO] = None,
    check: bool = False,
) -> SimulationRecord:
    """
    Simulate the network and measure delays at a tagged odd node.

    Packets at a node are served FIFO; dummies never count as delays or
    queue content. Per-packet delays count packets that arrived after
    ``warmup``; cycles and transition times count periods that opened after
    it and closed before ``horizon``.

    Args:
        params: Network rates
        g: Torus conflict graph
        horizon: Simulated time
        warmup: Discarded initial time
        rng: Random stream owned by this replica
        replica: Replica index echoed in the record
        seed_sequence: Seed of ``rng``, echoed in the record
        tagged: Observed node (default: the first odd vertex)
        trace: Text stream receiving a CSV event trace
        check: Validate the state after every event

    Returns:
        SimulationRecord

    Raises:
        InstabilityError: If the parameters fail the stability screen, or
            the total queue drifts upwards over a run with completed cycles
    """
    g.require_torus()
    if not 0 <= warmup < horizon:
        raise PreconditionError(f"warmup {warmup} must lie in [0, horizon={horizon})")
    _require_stable(params)

    even, odd = dominant_sets(g)
    if tagged is None:
        tagged = next(iter(odd))
    lam = float(params.lam[tagged])
    mu = float(params.mu[tagged])

    writer = None
    if trace is not None:
        writer = csv.writer(trace)
        writer.writerow(TRACE_COLUMNS)
    rows = 0

    state = SimState.initial(g)
    engine = EventEngine(state, params, rng)
    occupancy = _NodeOccupancy(state, warmup)
    in_system = 0
    queue_batches = _Batches(warmup, horizon)
    total_batches = _Batches(warmup, horizon)
    delay_sums = np.zeros(N_BATCHES)
    delay_counts = np.zeros(N_BATCHES, dtype=np.int64)
    even_time = odd_time = 0.0
    z = z_area = 0.0
    delays: List[float] = []

    last_dominant: Optional[str] = None
    even_start: Optional[float] = None
    odd_start: Optional[float] = None
    off_even = 0.0
    period_off_even = 0.0
    e_to_o: List[float] = []
    o_to_e: List[float] = []
    cycles: List[CycleRecord] = []
    events = 0

    while True:
        dt, kind, node = engine.draw()
        now, until = state.clock, min(state.clock + dt, horizon)
        bits = state.active_bits

        if last_dominant == "E" and bits != even.bits:
            off_even += until - now

        slope = lam if bits == even.bits else lam - mu
        if now < warmup:
            z, _ = _fluid_step(z, slope, min(until, warmup) - now)
        lo = max(now, warmup)
        if until > lo:
            d = until - lo
            z, area = _fluid_step(z, slope, d)
            z_area += area
            queue_batches.spread(lo, until, state.queue_length(tagged))
            total_batches.spread(lo, until, in_system)
            if bits == even.bits:
                even_time += d
            elif bits == odd.bits:
                odd_time += d

        if state.clock + dt > horizon:
            break
        if kind is EventKind.ACTIVATION or kind is EventKind.BACKOFF:
            occupancy.touch(node, state.clock + dt)
        event = engine.apply(dt, kind, node)
        events += 1
        if kind is EventKind.ARRIVAL:
            in_system += 1
        elif event.delay is not None:
            in_system -= 1
        if check:
            state.validate()
            engine.clocks.validate()

        if writer is not None and rows < TRACE_ROW_LIMIT:
            writer.writerow([event.time, event.node, event.kind.name.lower(), event.queue_change])
            rows += 1
            if rows == TRACE_ROW_LIMIT:
                logger.info("trace truncated at %d rows", TRACE_ROW_LIMIT)

        if event.delay is not None and event.node == tagged:
            if event.time - event.delay >= warmup:
                delays.append(event.delay)
                b = queue_batches.index(event.time)
                delay_sums[b] += event.delay
                delay_counts[b] += 1

        if kind is EventKind.ARRIVAL or kind is EventKind.CONTINUE:
            continue
        bits = state.active_bits
        if bits == odd.bits and last_dominant != "O":
            if last_dominant == "E":
                if even_start >= warmup:
                    e_to_o.append(event.time - even_start)
                period_off_even = off_even
            odd_start = event.time
            last_dominant = "O"
        elif bits == even.bits and last_dominant != "E":
            if last_dominant == "O":
                if odd_start >= warmup:
                    o_to_e.append(event.time - odd_start)
                if even_start is not None and even_start >= warmup:
                    t_k = odd_start - even_start
                    cycles.append(CycleRecord(
                        start=even_start,
                        even_duration=t_k,
                        odd_duration=event.time - odd_start,
                        off_even_time=period_off_even,
                        even_dwell=t_k - period_off_even,
                    ))
            even_start = event.time
            off_even = 0.0
            last_dominant = "E"

    occupancy.close(horizon)
    span = horizon - warmup
    total_means = total_batches.means()
    _check_drift(total_means, lam_total=float(params.lam.sum()), span=span, n_cycles=len(cycles))

    delay_means = [
        float(s / c) if c else math.nan for s, c in zip(delay_sums, delay_counts)
    ]
    logger.info(
        "replica %d: %d events, %d departures, %d cycles", replica, events, len(delays), len(cycles)
    )
    return SimulationRecord(
        replica=replica,
        seed_entropy=int(seed_sequence.entropy) if seed_sequence is not None else 0,
        spawn_key=list(seed_sequence.spawn_key) if seed_sequence is not None else [],
        horizon=horizon,
        warmup=warmup,
        events=events,
        tagged_node=tagged,
        transition_e_to_o=e_to_o,
        transition_o_to_e=o_to_e,
        cycles=cycles,
        delays=delays,
        n_departures=len(delays),
        mean_delay=float(np.mean(delays)) if delays else None,
        queue_time_average=float(queue_batches.totals.sum() / span),
        queue_batch_means=queue_batches.means(),
        delay_batch_means=delay_means,
        z_time_average=z_area / span,
        activity_fraction=[t / span for t in occupancy.active],
        unblocked_fraction=[t / span for t in occupancy.unblocked],
        even_time_fraction=even_time / span,
        odd_time_fraction=odd_time / span,
    )


def _check_drift(
    total_means: Sequence[float], lam_total: float, span: float, n_cycles: int
) -> None:
    """
    Flag a queue whose batch means grow steadily and hold a large share of all arrivals.

    Without completed cycles a long dominant period looks the same as drift,
    so that case is only logged.
    """
    x = np.arange(len(total_means))
    fit = sp_stats.linregress(x, total_means)
    grown = total_means[-1] > DRIFT_ARRIVAL_SHARE * lam_total * span
    if not (fit.slope > 0 and fit.pvalue < DRIFT_P_VALUE and grown):
        return
    diagnostics = {
        "slope_per_batch": float(fit.slope),
        "p_value": float(fit.pvalue),
        "final_total_queue": float(total_means[-1]),
        "cycles": n_cycles,
    }
    if n_cycles < 2:
        logger.warning("queue drift without completed cycles (horizon too short?): %s", diagnostics)
        return
    raise InstabilityError("queue drift detected over the horizon", "QueueDrift", diagnostics)


def _run_replica(
    params: NetworkParams,
    g: ConflictGraph,
    horizon: float,
    warmup: float,
    replica: int,
    seed_sequence: np.random.SeedSequence,
    trace: bool,
    check: bool,
) -> Tuple[SimulationRecord, Optional[str]]:
    rng = np.random.default_rng(seed_sequence)
    buffer = io.StringIO() if trace else None
    record = run_delay_experiment(
        params, g, horizon, warmup, rng,
        replica=replica, seed_sequence=seed_sequence, trace=buffer, check=check,
    )
    return record, buffer.getvalue() if buffer is not None else None


def run_replicas(
    params: NetworkParams,
    g: ConflictGraph,
    horizon: float,
    warmup: float,
    replicas: int,
    seed: int,
    jobs: int = 1,
    trace: bool = False,
    check: bool = False,
) -> Tuple[List[SimulationRecord], Optional[str]]:
    """
    Run independent replicas, each on its own spawned seed.

    Returns:
        tuple: (records ordered by replica, CSV trace of replica 0 or None)
    """
    if replicas < 1:
        raise PreconditionError(f"need at least one replica, got {replicas}")
    _require_stable(params)
    children = np.random.SeedSequence(seed).spawn(replicas)
    results = Parallel(n_jobs=jobs)(
        delayed(_run_replica)(params, g, horizon, warmup, i, child, trace and i == 0, check)
        for i, child in enumerate(children)
    )
    results = sorted(results, key=lambda r: r[0].replica)
    return [r for r, _ in results], results[0][1]


def renewal_statistics(
    records: Union[SimulationRecord, Sequence[SimulationRecord]], level: float = 0.95
) -> RenewalSummary:
    """
    Renewal-cycle averages pooled over replicas.

    Raises:
        PreconditionError: With fewer than 30 complete cycles
    """
    if isinstance(records, SimulationRecord):
        records = [records]
    cycles = [c for r in records for c in r.cycles]
    if len(cycles) < MIN_RENEWAL_CYCLES:
        raise PreconditionError(
            f"renewal statistics need at least {MIN_RENEWAL_CYCLES} cycles, got {len(cycles)}"
        )
    t = np.array([c.even_duration for c in cycles])
    v = np.array([c.odd_duration for c in cycles])
    u = np.array([c.off_even_time for c in cycles])
    s = np.array([c.even_dwell for c in cycles])
    return RenewalSummary(
        n_cycles=len(cycles),
        mean_even_duration=t_interval(t, level),
        mean_odd_duration=t_interval(v, level),
        mean_off_even=float(u.mean()),
        mean_even_dwell=float(s.mean()),
        off_even_ratio=float(u.mean() / t.mean()),
        dwell_fraction=ratio_of_means_interval(s, t + v, level),
    )


def exact_off_even_ratio(law: ActivityLaw) -> float:
    """
    E U_E / E T_{E->O} from the stationary law of a torus.

    By renewal-reward, pi(E) = E S_E / (E T_{E->O} + E T_{O->E}); the two
    transition times have equal means on a homogeneous torus, so
    E U_E / E T_{E->O} = 1 - E S_E / E T_{E->O} = 1 - 2 pi(E).
    """
    if law.sigma is None:
        raise PreconditionError("the off-E ratio needs a homogeneous law")
    even_id, _ = law.space.dominant_ids()
    return 1.0 - 2.0 * law.probability(even_id)


def occupancy_chi_square(
    space: StateSpace,
    law: ActivityLaw,
    params: NetworkParams,
    rng: np.random.Generator,
    n_samples: int,
    spacing: float,
    burn_in: Optional[float] = None,
    min_expected: float = 5.0,
    n_batches: int = CHI_SQUARE_BATCHES,
) -> ChiSquareResult:
    """
    Chi-square test of the activity process against an exact stationary law.

    The activity state is read on a time grid with the given spacing after
    ``burn_in`` (default 10 spacings). States with expected count below
    ``min_expected`` are pooled into one bin.

    Readings closer than the mixing time are correlated, which inflates the
    plain statistic. The samples are cut into ``n_batches`` consecutive
    batches; the spread of the batch bin frequencies gives a design effect
    per bin, and the statistic is divided by their first-order mean before
    the p-value is taken.

    Raises:
        PreconditionError: With fewer than two samples per batch or two bins
    """
    if n_batches < 2 or n_samples < 2 * n_batches:
        raise PreconditionError(
            f"need at least two samples in each of {n_batches} batches, got {n_samples}"
        )
    activity = params.without_arrivals()
    state = SimState.initial(space.graph)
    engine = EventEngine(state, activity, rng)
    readings = np.empty(n_samples, dtype=np.int64)
    next_read = burn_in if burn_in is not None else 10 * spacing
    taken = 0
    while taken < n_samples:
        dt, kind, node = engine.draw()
        while taken < n_samples and state.clock + dt > next_read:
            readings[taken] = space.state_id(state.active_bits)
            taken += 1
            next_read += spacing
        engine.apply(dt, kind, node)

    probabilities = law.probabilities
    expected = n_samples * probabilities
    order = np.argsort(expected, kind="stable")
    small = order[expected[order] < min_expected]
    pooled = float(expected[small].sum())
    for i in order[small.size:]:
        if small.size == 0 or pooled >= min_expected:
            break
        small = np.append(small, i)
        pooled += float(expected[i])
    keep = np.setdiff1d(np.arange(len(space)), small)
    n_bins = keep.size + (1 if small.size else 0)
    bin_of = np.full(len(space), keep.size, dtype=np.int64)
    bin_of[keep] = np.arange(keep.size)
    if n_bins < 2:
        raise PreconditionError("the chi-square test needs at least two bins")

    bins = bin_of[readings]
    f_obs = np.bincount(bins, minlength=n_bins)
    p_bin = np.bincount(bin_of, weights=probabilities, minlength=n_bins)
    f_exp = n_samples * p_bin
    f_exp = f_exp * (f_obs.sum() / f_exp.sum())
    raw_statistic, _ = sp_stats.chisquare(f_obs, f_exp)

    size = n_samples // n_batches
    batch_freq = np.stack([
        np.bincount(bins[b * size:(b + 1) * size], minlength=n_bins) / size
        for b in range(n_batches)
    ])
    independent_var = p_bin * (1 - p_bin) / size
    bin_effect = batch_freq.var(axis=0, ddof=1) / independent_var
    design_effect = max(1.0, float(np.sum((1 - p_bin) * bin_effect) / (n_bins - 1)))
    statistic = float(raw_statistic) / design_effect
    p_value = float(sp_stats.chi2.sf(statistic, df=n_bins - 1))
    logger.debug(
        "occupancy chi-square: raw %.4g, design effect %.3g, p=%.3g",
        raw_statistic, design_effect, p_value,
    )
    return ChiSquareResult(
        statistic=statistic,
        p_value=p_value,
        n_samples=n_samples,
        n_bins=n_bins,
        raw_statistic=float(raw_statistic),
        design_effect=design_effect,
    )


def little_law_check(
    mean_queue: ConfidenceInterval, mean_delay: ConfidenceInterval, lam: float
) -> LittleCheck:
    """|E L - lambda E W| against the joint half-width of both estimates."""
    residual = mean_queue.mean - lam * mean_delay.mean
    half_width = math.hypot(mean_queue.half_width, lam * mean_delay.half_width)
    return LittleCheck(residual, half_width, bool(abs(residual) <= half_width))


def delay_ratio_bound(rho: float) -> float:
    """1 / (4 - 2 rho)."""
    return 1.0 / (4 - 2 * rho)


def delay_ratio_interval(
    mean_delay: ConfidenceInterval, mean_transition: ConfidenceInterval, rho: float
) -> Tuple[ConfidenceInterval, float]:
    """E W / E T_{E->O} with its interval, and the lower value 1/(4 - 2 rho)."""
    return ratio_interval(mean_delay, mean_transition), delay_ratio_bound(rho)


def aggregate_replicas(
    records: Sequence[SimulationRecord],
    params: NetworkParams,
    side: int,
    level: float = 0.95,
) -> SimulationAggregate:
    """
    Combine replicas into one summary.

    Intervals come from replica means when there are at least two replicas,
    otherwise from the time-batch means of the single replica.
    """
    if not records:
        raise PreconditionError("no replicas to aggregate")
    tagged = records[0].tagged_node
    lam = float(params.lam[tagged])
    rho = float(params.node_rho[tagged])

    if len(records) >= 2:
        mean_queue = t_interval([r.queue_time_average for r in records], level)
        mean_delay = t_interval(
            [r.mean_delay if r.mean_delay is not None else math.nan for r in records], level
        )
    else:
        mean_queue = t_interval(records[0].queue_batch_means, level)
        mean_delay = t_interval(records[0].delay_batch_means, level)
    z_average = t_interval([r.z_time_average for r in records], level)

    e_to_o = [t for r in records for t in r.transition_e_to_o]
    o_to_e = [t for r in records for t in r.transition_o_to_e]
    mean_e_to_o = t_interval(e_to_o, level) if e_to_o else None
    mean_o_to_e = t_interval(o_to_e, level) if o_to_e else None

    bound = delay_ratio_bound(rho)
    ratio = None
    lower_estimate = None
    if mean_e_to_o is not None:
        ratio, _ = delay_ratio_interval(mean_delay, mean_e_to_o, rho)
        lower_estimate = lam * bound * mean_e_to_o.mean

    little = little_law_check(mean_queue, mean_delay, lam)
    theta = np.mean([r.activity_fraction for r in records], axis=0)
    unblocked = np.mean([r.unblocked_fraction for r in records], axis=0)

    renewal = None
    if sum(len(r.cycles) for r in records) >= MIN_RENEWAL_CYCLES:
        renewal = renewal_statistics(records, level)

    return SimulationAggregate(
        side=side,
        sigma=params.sigma,
        rho=params.rho,
        stability=stability_probe(params).value,
        replicas=len(records),
        mean_queue=mean_queue,
        mean_delay=mean_delay,
        mean_transition_e_to_o=mean_e_to_o,
        mean_transition_o_to_e=mean_o_to_e,
        delay_ratio=ratio,
        delay_ratio_bound=bound,
        little_residual=little.residual,
        little_half_width=little.half_width,
        little_consistent=little.consistent,
        queue_lower_estimate=lower_estimate,
        z_time_average=z_average,
        theta=theta.tolist(),
        theta_predicted=(params.node_sigma * unblocked).tolist(),
        renewal=renewal,
    )
