"""
HCGL Recorder Simulator - Event engine for the joint activity and queue process.

Events are drawn by a direct-method race over four clocks per node:
arrival (lambda), activation (nu, only while idle and unblocked), completion
with back-off (p mu) and completion-and-continue ((1 - p) mu). Back-off timers
are never frozen: by memorylessness, activating at rate nu exactly while
unblocked is the suspended back-off.

``EventEngine`` runs the same race incrementally: a ``ClockTable`` only
recomputes the node that turned on or off and its neighbours, and uniforms
come in blocks from the replica generator.
"""

import logging
import math
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from functools import cached_property
from itertools import accumulate
from typing import Deque, List, NamedTuple, Optional

import numpy as np
from scipy import stats as sp_stats

from hcgl_core.errors import ConfigError, PreconditionError
from hcgl_core.schemas import ExperimentConfig
from hcgl_core.topology import ConflictGraph, VertexSet

logger = logging.getLogger(__name__)

UNIFORM_BLOCK = 4096
RESUM_EVERY = 4096


class Service(IntEnum):
    IDLE = 0
    DUMMY = 1
    REAL = 2


class EventKind(IntEnum):
    ARRIVAL = 0
    ACTIVATION = 1
    BACKOFF = 2
    CONTINUE = 3


class Stability(str, Enum):
    STABLE = "Stable"
    BELOW_SIGMA_THRESHOLD = "BelowSigmaThreshold"
    OVERLOADED = "Overloaded"


def stability_threshold(rho: float) -> float:
    """Smallest sigma (exclusive) that can keep all queues stable at load rho."""
    if rho >= 1:
        return math.inf
    return rho / (2 * (1 - rho))


@dataclass(frozen=True, eq=False)
class NetworkParams:
    """
    Per-node rates of the network.

    ``lam`` may be all zeros for activity-only runs; every other rate must be
    positive and every p_i must lie in (0, 1].
    """

    lam: np.ndarray
    mu: np.ndarray
    nu: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        shapes = {a.shape for a in (self.lam, self.mu, self.nu, self.p)}
        if len(shapes) != 1:
            raise ConfigError(f"per-node rate arrays differ in shape: {sorted(shapes)}")
        if np.any(self.lam < 0):
            raise ConfigError("arrival rates must not be negative")
        if np.any(self.mu <= 0) or np.any(self.nu <= 0):
            raise ConfigError("activation and completion rates must be positive")
        if np.any(self.p <= 0) or np.any(self.p > 1):
            raise ConfigError("back-off probabilities must lie in (0, 1]")

    @classmethod
    def homogeneous(
        cls, n_nodes: int, lam: float, mu: float = 1.0, nu: float = 1.0, p: float = 1.0
    ) -> "NetworkParams":
        def fill(x: float) -> np.ndarray:
            return np.full(n_nodes, float(x))

        return cls(lam=fill(lam), mu=fill(mu), nu=fill(nu), p=fill(p))

    @classmethod
    def from_config(cls, config: ExperimentConfig, n_nodes: int) -> "NetworkParams":
        """
        Build per-node rates from a resolved config and its overrides.

        Raises:
            ConfigError: If an override names a vertex outside the graph
        """
        params = cls.homogeneous(
            n_nodes, lam=config.lam or 0.0, mu=config.mu, nu=config.nu, p=config.p
        )
        if config.overrides is None:
            return params
        bad = [v for v in config.overrides.nodes() if not 0 <= v < n_nodes]
        if bad:
            raise ConfigError(f"overrides name unknown vertices {bad} (graph has {n_nodes})")
        arrays = {name: getattr(params, name).copy() for name in ("lam", "mu", "nu", "p")}
        for name in arrays:
            for node, value in getattr(config.overrides, name).items():
                arrays[name][node] = value
        return cls(**arrays)

    @property
    def n_nodes(self) -> int:
        return int(self.lam.size)

    @cached_property
    def backoff_rate(self) -> np.ndarray:
        return self.p * self.mu

    @cached_property
    def continue_rate(self) -> np.ndarray:
        return (1 - self.p) * self.mu

    @cached_property
    def node_sigma(self) -> np.ndarray:
        return self.nu / self.backoff_rate

    @cached_property
    def node_rho(self) -> np.ndarray:
        """2 lambda / mu: arrivals against the mu / 2 a node can serve at most."""
        return 2 * self.lam / self.mu

    @property
    def sigma(self) -> float:
        """Smallest per-node activity factor (the common value when homogeneous)."""
        return float(self.node_sigma.min())

    @property
    def rho(self) -> float:
        """Largest per-node load."""
        return float(self.node_rho.max())

    @property
    def is_homogeneous(self) -> bool:
        return all(np.ptp(a) == 0 for a in (self.lam, self.mu, self.nu, self.p))

    def without_arrivals(self) -> "NetworkParams":
        return NetworkParams(lam=np.zeros_like(self.lam), mu=self.mu, nu=self.nu, p=self.p)


def stability_probe(params: NetworkParams) -> Stability:
    """Necessary-condition screen: Overloaded iff rho >= 1, else compare sigma to the threshold."""
    rho = params.rho
    if rho >= 1:
        return Stability.OVERLOADED
    if params.sigma <= stability_threshold(rho):
        return Stability.BELOW_SIGMA_THRESHOLD
    return Stability.STABLE


@dataclass
class SimState:
    """
    Mutable state of one replica.

    ``queues`` counts waiting packets only; the packet in service, if real,
    is tracked by ``service`` and ``service_arrival``.
    """

    graph: ConflictGraph = field(repr=False)
    active_bits: int
    queues: np.ndarray
    service: np.ndarray
    service_arrival: np.ndarray
    waiting: List[Deque[float]] = field(repr=False)
    blocked: np.ndarray
    clock: float = 0.0

    @classmethod
    def initial(cls, graph: ConflictGraph, active: Optional[VertexSet] = None) -> "SimState":
        """Empty queues; ``active`` nodes start serving dummies."""
        n = graph.n_vertices
        bits = active.bits if active is not None else 0
        for v in range(n):
            if bits >> v & 1 and graph.neighbor_masks[v] & bits:
                raise PreconditionError("initial active set is not independent")
        service = np.array(
            [Service.DUMMY if bits >> v & 1 else Service.IDLE for v in range(n)], dtype=np.int8
        )
        blocked = np.array(
            [(graph.neighbor_masks[v] & bits).bit_count() for v in range(n)], dtype=np.int64
        )
        return cls(
            graph=graph,
            active_bits=bits,
            queues=np.zeros(n, dtype=np.int64),
            service=service,
            service_arrival=np.full(n, math.nan),
            waiting=[deque() for _ in range(n)],
            blocked=blocked,
        )

    @property
    def active(self) -> VertexSet:
        return VertexSet(self.active_bits, self.graph.n_vertices)

    def queue_length(self, node: int) -> int:
        """L_i(t): waiting packets plus a real packet in service."""
        return int(self.queues[node]) + int(self.service[node] == Service.REAL)

    def validate(self) -> None:
        """
        Raises:
            PreconditionError: If the active set is not independent or the
                service flags disagree with it
        """
        bits = self.active_bits
        for v in range(self.graph.n_vertices):
            on = bool(bits >> v & 1)
            if on and self.graph.neighbor_masks[v] & bits:
                raise PreconditionError(f"active set lost independence at vertex {v}")
            if on != (self.service[v] != Service.IDLE):
                raise PreconditionError(f"service flag of vertex {v} disagrees with activity")
            if self.queues[v] != len(self.waiting[v]):
                raise PreconditionError(f"queue count of vertex {v} disagrees with its FIFO")


class Event(NamedTuple):
    time: float
    node: int
    kind: EventKind
    queue_change: int
    delay: Optional[float]


def enabled_rates(state: SimState, params: NetworkParams) -> np.ndarray:
    """Rates of every clock, shape (4, n) in EventKind order."""
    idle = state.service == Service.IDLE
    busy = ~idle
    return np.stack((
        params.lam,
        np.where(idle & (state.blocked == 0), params.nu, 0.0),
        np.where(busy, params.backoff_rate, 0.0),
        np.where(busy, params.continue_rate, 0.0),
    ))


def draw_event(
    state: SimState, params: NetworkParams, rng: np.random.Generator
) -> tuple[float, EventKind, int]:
    """Sample (holding time, kind, node) without changing the state."""
    rates = enabled_rates(state, params).ravel()
    cumulative = np.cumsum(rates)
    total = cumulative[-1]
    if total <= 0:
        raise PreconditionError("no transition is enabled")
    dt = rng.exponential(1.0 / total)
    k = int(np.searchsorted(cumulative, rng.random() * total, side="right"))
    k = min(k, rates.size - 1)
    kind, node = divmod(k, params.n_nodes)
    return float(dt), EventKind(kind), node


def _start_service(state: SimState, node: int) -> int:
    if state.queues[node] > 0:
        state.queues[node] -= 1
        state.service[node] = Service.REAL
        state.service_arrival[node] = state.waiting[node].popleft()
        return -1
    state.service[node] = Service.DUMMY
    state.service_arrival[node] = math.nan
    return 0


def _finish_service(state: SimState, node: int) -> Optional[float]:
    delay = None
    if state.service[node] == Service.REAL:
        delay = state.clock - float(state.service_arrival[node])
    state.service[node] = Service.IDLE
    state.service_arrival[node] = math.nan
    return delay


def apply_event(state: SimState, dt: float, kind: EventKind, node: int) -> Event:
    """Advance the clock by ``dt`` and apply one event in place."""
    state.clock += dt
    change = 0
    delay = None
    neighbors = state.graph.neighbors(node)

    if kind is EventKind.ARRIVAL:
        state.queues[node] += 1
        state.waiting[node].append(state.clock)
        change = 1
    elif kind is EventKind.ACTIVATION:
        state.active_bits |= 1 << node
        for w in neighbors:
            state.blocked[w] += 1
        change = _start_service(state, node)
    elif kind is EventKind.BACKOFF:
        delay = _finish_service(state, node)
        state.active_bits &= ~(1 << node)
        for w in neighbors:
            state.blocked[w] -= 1
    else:
        delay = _finish_service(state, node)
        change = _start_service(state, node)
    return Event(time=state.clock, node=node, kind=kind, queue_change=change, delay=delay)


def step(state: SimState, params: NetworkParams, rng: np.random.Generator) -> Event:
    """
    Sample and apply the next event.

    Rebuilds every rate from the state; long runs go through ``EventEngine``.

    Args:
        state: Replica state, updated in place
        params: Network rates
        rng: Random stream owned by the replica

    Returns:
        Event describing what happened
    """
    dt, kind, node = draw_event(state, params, rng)
    return apply_event(state, dt, kind, node)


class UniformStream:
    """Uniform [0, 1) draws served from blocks of one Generator."""

    def __init__(self, rng: np.random.Generator, block: int = UNIFORM_BLOCK):
        self._rng = rng
        self._block_size = block
        self._block: List[float] = []
        self._pos = 0

    def next(self) -> float:
        if self._pos == len(self._block):
            self._block = self._rng.random(self._block_size).tolist()
            self._pos = 0
        u = self._block[self._pos]
        self._pos += 1
        return u


class ClockTable:
    """
    Enabled clock rates of one replica, kept in step with its state.

    After an activation or back-off only the node and its neighbours are
    recomputed. Each kind keeps its running total, its count of enabled
    clocks and a cumulative sum that is rebuilt only when the kind is drawn
    after a change. Arrival and completion-and-continue rates never change
    unless a node turns on or off, so their sums are mostly reused.
    """

    def __init__(self, state: SimState, params: NetworkParams):
        if params.n_nodes != state.graph.n_vertices:
            raise ConfigError(
                f"{params.n_nodes} rates for a graph of {state.graph.n_vertices} vertices"
            )
        self.state = state
        self.params = params
        self._nu = params.nu.tolist()
        self._backoff = params.backoff_rate.tolist()
        self._continue = params.continue_rate.tolist()
        self._neighbors = state.graph.adjacency
        self.rows: List[List[float]] = enabled_rates(state, params).tolist()
        self._cumulative: List[Optional[List[float]]] = [None] * len(EventKind)
        self._totals = [0.0] * len(EventKind)
        self._enabled = [0] * len(EventKind)
        self._updates = 0
        self._resum()

    def _resum(self) -> None:
        for kind, row in enumerate(self.rows):
            self._totals[kind] = math.fsum(row)
            self._enabled[kind] = sum(1 for r in row if r > 0)

    @property
    def total(self) -> float:
        return sum(self._totals)

    def _set(self, kind: int, node: int, rate: float) -> None:
        row = self.rows[kind]
        old = row[node]
        if old == rate:
            return
        row[node] = rate
        self._enabled[kind] += (rate > 0) - (old > 0)
        self._totals[kind] = self._totals[kind] + rate - old if self._enabled[kind] else 0.0
        self._cumulative[kind] = None

    def refresh(self, node: int) -> None:
        """Recompute the clocks of ``node`` and its neighbours from the state."""
        service = self.state.service
        blocked = self.state.blocked
        for w in (node, *self._neighbors[node]):
            busy = service[w] != Service.IDLE
            self._set(EventKind.ACTIVATION, w, 0.0 if busy or blocked[w] else self._nu[w])
            self._set(EventKind.BACKOFF, w, self._backoff[w] if busy else 0.0)
            self._set(EventKind.CONTINUE, w, self._continue[w] if busy else 0.0)
        self._updates += 1
        if self._updates % RESUM_EVERY == 0:
            self._resum()

    def validate(self) -> None:
        """
        Raises:
            PreconditionError: If the table disagrees with a full rebuild
        """
        if not np.array_equal(np.array(self.rows), enabled_rates(self.state, self.params)):
            raise PreconditionError("clock table is out of step with the state")

    def pick(self, u: float) -> tuple[EventKind, int]:
        """Map a uniform draw in [0, 1) to (kind, node) with probability rate / total."""
        totals = self._totals
        r = u * sum(totals)
        kind = None
        for k, share in enumerate(totals):
            if self._enabled[k] == 0:
                continue
            kind = k
            if r < share:
                break
            r -= share
        if kind is None:
            raise PreconditionError("no transition is enabled")
        cumulative = self._cumulative[kind]
        if cumulative is None:
            cumulative = list(accumulate(self.rows[kind]))
            self._cumulative[kind] = cumulative
        node = bisect_right(cumulative, r)
        row = self.rows[kind]
        if node >= len(row):
            # rounding pushed r past the last partial sum
            node = max(i for i, rate in enumerate(row) if rate > 0)
        return EventKind(kind), node


class EventEngine:
    """
    Drives one replica: the state, its clock table and a buffered random stream.

    Equivalent in law to repeated ``step`` calls, at a cost that does not
    grow with the number of nodes beyond the cumulative sum of one kind.
    """

    def __init__(self, state: SimState, params: NetworkParams, rng: np.random.Generator):
        self.state = state
        self.params = params
        self.clocks = ClockTable(state, params)
        self._uniforms = UniformStream(rng)

    def draw(self) -> tuple[float, EventKind, int]:
        """Sample (holding time, kind, node) without changing the state."""
        total = self.clocks.total
        if total <= 0:
            raise PreconditionError("no transition is enabled")
        dt = -math.log1p(-self._uniforms.next()) / total
        kind, node = self.clocks.pick(self._uniforms.next())
        return dt, kind, node

    def apply(self, dt: float, kind: EventKind, node: int) -> Event:
        event = apply_event(self.state, dt, kind, node)
        if kind is EventKind.ACTIVATION or kind is EventKind.BACKOFF:
            self.clocks.refresh(node)
        return event

    def step(self) -> Event:
        dt, kind, node = self.draw()
        return self.apply(dt, kind, node)


def run_events(
    state: SimState,
    params: NetworkParams,
    rng: np.random.Generator,
    n_events: int,
    check: bool = False,
) -> SimState:
    """
    Apply ``n_events`` events through an EventEngine.

    With ``check`` the state and the clock table are validated after each one.
    """
    engine = EventEngine(state, params, rng)
    for _ in range(n_events):
        engine.step()
        if check:
            state.validate()
            engine.clocks.validate()
    return state


class GeneratorAudit(NamedTuple):
    expected: np.ndarray
    empirical: np.ndarray
    half_width: np.ndarray
    n_draws: int


def event_type_frequencies(
    state: SimState,
    params: NetworkParams,
    rng: np.random.Generator,
    n_draws: int,
    level: float = 0.99,
) -> GeneratorAudit:
    """
    Estimate the rate of every clock out of a frozen state.

    Draws ``n_draws`` events without applying them; the empirical rate of a
    clock is its share of draws times the total rate estimated from the mean
    holding time. Draws go through the same sampler as EventEngine.
    Half-widths are normal-approximation bounds at ``level``.
    """
    expected = enabled_rates(state, params)
    engine = EventEngine(state, params, rng)
    counts = np.zeros_like(expected)
    holding = 0.0
    for _ in range(n_draws):
        dt, kind, node = engine.draw()
        counts[int(kind), node] += 1
        holding += dt
    total = n_draws / holding
    share = counts / n_draws
    # share error plus the relative error of the total-rate estimate
    z = sp_stats.norm.ppf(0.5 + level / 2)
    half_width = z * total * (
        np.sqrt(share * (1 - share) / n_draws) + share / math.sqrt(n_draws)
    )
    return GeneratorAudit(
        expected=expected, empirical=share * total, half_width=half_width, n_draws=n_draws
    )
