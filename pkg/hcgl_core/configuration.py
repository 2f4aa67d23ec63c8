"""
HCGL Core Configuration Space - Independent sets, the state space and its law.

States are stored as integer bit masks over vertex ids. ``enumerate_states``
assigns state ids in ascending mask order, so ids are reproducible across runs
(the empty configuration is always state 0).
"""

import logging
import math
import os
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import logsumexp

from hcgl_core.errors import ConfigError, EnumerationCapError
from hcgl_core.schemas import StateSpaceDocument
from hcgl_core.topology import ConflictGraph, VertexSet, dominant_sets

logger = logging.getLogger(__name__)

DEFAULT_ENUM_CAP = 36

# Growth rate of the number of independent sets on the square lattice
HARD_SQUARE_ENTROPY = 1.5030480824753323


def enumeration_cap() -> int:
    """Vertex-count cap for exhaustive enumeration (``HCGL_ENUM_CAP`` overrides)."""
    raw = os.environ.get("HCGL_ENUM_CAP")
    if raw is None:
        return DEFAULT_ENUM_CAP
    try:
        return int(raw)
    except ValueError as e:
        raise ConfigError(f"HCGL_ENUM_CAP must be an integer, got {raw!r}") from e


def estimate_state_count(n_vertices: int) -> float:
    return HARD_SQUARE_ENTROPY ** n_vertices


@dataclass(frozen=True)
class Configuration:
    """An independent set of ``graph``; independence is checked on construction."""

    occupied: VertexSet
    graph: ConflictGraph = field(compare=False, repr=False)

    def __post_init__(self):
        if self.occupied.width != self.graph.n_vertices:
            raise ConfigError("configuration width does not match the graph")
        if not is_independent(self.graph, self.occupied):
            raise ConfigError(f"0x{self.occupied.to_hex()} is not an independent set")

    @property
    def mask(self) -> int:
        return self.occupied.bits

    def __len__(self) -> int:
        return len(self.occupied)

    def flip(self, v: int) -> "Configuration":
        return Configuration(VertexSet(self.occupied.bits ^ (1 << v), self.occupied.width), self.graph)


def is_independent(g: ConflictGraph, s: VertexSet) -> bool:
    """True iff no edge of ``g`` has both ends in ``s``."""
    bits = s.bits
    masks = g.neighbor_masks
    return not any(masks[v] & bits for v in s)


def efficiency_gap(state: Union[Configuration, VertexSet, int], side: int) -> int:
    """Delta(I) = L^2/2 - |I|, the shortfall from a dominant state."""
    if isinstance(state, int):
        size = state.bit_count()
    else:
        size = len(state)
    return side * side // 2 - size


@dataclass(frozen=True)
class StateSpace:
    """
    All independent sets of a graph together with the single-flip graph.

    ``flip_indptr``/``flip_indices`` hold the flip graph in CSR layout;
    neighbors of each state are sorted by state id.
    """

    graph: ConflictGraph
    masks: Tuple[int, ...]
    index: Dict[int, int] = field(repr=False)
    flip_indptr: np.ndarray = field(repr=False)
    flip_indices: np.ndarray = field(repr=False)
    sizes: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.masks)

    @property
    def cardinality(self) -> int:
        """|Omega|."""
        return len(self.masks)

    def state_id(self, state: Union[Configuration, VertexSet, int]) -> int:
        if isinstance(state, Configuration):
            mask = state.mask
        elif isinstance(state, VertexSet):
            mask = state.bits
        else:
            mask = int(state)
        try:
            return self.index[mask]
        except KeyError as e:
            raise ConfigError(f"0x{mask:x} is not a state of this space") from e

    def configuration(self, state_id: int) -> Configuration:
        return Configuration(VertexSet(self.masks[state_id], self.graph.n_vertices), self.graph)

    def flip_neighbors(self, state_id: int) -> np.ndarray:
        return self.flip_indices[self.flip_indptr[state_id]:self.flip_indptr[state_id + 1]]

    def flip_edges(self) -> Iterator[Tuple[int, int]]:
        for i in range(len(self.masks)):
            for j in self.flip_neighbors(i):
                yield i, int(j)

    @property
    def side(self) -> int:
        return self.graph.require_torus()

    @property
    def gaps(self) -> np.ndarray:
        """Efficiency gap of every state (torus only)."""
        side = self.side
        return side * side // 2 - self.sizes

    def dominant_ids(self) -> Tuple[int, int]:
        even, odd = dominant_sets(self.graph)
        return self.index[even.bits], self.index[odd.bits]

    def hex(self, state_id: int) -> str:
        return VertexSet(self.masks[state_id], self.graph.n_vertices).to_hex()


def _independent_masks(g: ConflictGraph) -> List[int]:
    n = g.n_vertices
    masks = g.neighbor_masks
    found: List[int] = []

    # Depth-first over vertex ids; a vertex joins only if none of its neighbors did
    def extend(v: int, current: int) -> None:
        if v == n:
            found.append(current)
            return
        extend(v + 1, current)
        if not masks[v] & current:
            extend(v + 1, current | (1 << v))

    extend(0, 0)
    found.sort()
    return found


def enumerate_states(g: ConflictGraph, cap: Optional[int] = None) -> StateSpace:
    """
    Enumerate every independent set of ``g`` and build the single-flip graph.

    Args:
        g: Conflict graph
        cap: Maximum vertex count (defaults to ``enumeration_cap()``)

    Returns:
        StateSpace with deterministic state ids

    Raises:
        EnumerationCapError: If ``g`` has more vertices than the cap
    """
    cap = enumeration_cap() if cap is None else cap
    if g.n_vertices > cap:
        raise EnumerationCapError(g.n_vertices, cap, estimate_state_count(g.n_vertices))

    states = _independent_masks(g)
    index = {m: i for i, m in enumerate(states)}
    nmasks = g.neighbor_masks

    indptr = np.zeros(len(states) + 1, dtype=np.int64)
    indices: List[int] = []
    for i, m in enumerate(states):
        row = []
        for v in range(g.n_vertices):
            bit = 1 << v
            if m & bit:
                row.append(index[m ^ bit])
            elif not nmasks[v] & m:
                row.append(index[m | bit])
        row.sort()
        indices.extend(row)
        indptr[i + 1] = len(indices)

    sizes = np.fromiter((m.bit_count() for m in states), dtype=np.int64, count=len(states))
    logger.info(
        "enumerated %d independent sets on %d vertices (%d flip edges)",
        len(states), g.n_vertices, len(indices) // 2,
    )
    return StateSpace(
        graph=g,
        masks=tuple(states),
        index=index,
        flip_indptr=indptr,
        flip_indices=np.asarray(indices, dtype=np.int64),
        sizes=sizes,
    )


def bottom(space: StateSpace, state_ids: Iterable[int]) -> List[int]:
    """F(A): the states of ``A`` with the smallest efficiency gap."""
    ids = sorted(set(int(i) for i in state_ids))
    if not ids:
        return []
    gaps = space.gaps[ids]
    low = gaps.min()
    return [i for i, d in zip(ids, gaps) if d == low]


@dataclass(frozen=True)
class ActivityLaw:
    """
    Product-form stationary law of the activity process, carried in log space.

    ``log_weights[i]`` is log pi(state i) up to the constant ``log_z``.
    """

    space: StateSpace = field(repr=False)
    sigma: Optional[float]
    per_vertex_sigma: Optional[Tuple[float, ...]]
    log_weights: np.ndarray = field(repr=False)
    log_z: float

    @property
    def log_probabilities(self) -> np.ndarray:
        return self.log_weights - self.log_z

    @property
    def probabilities(self) -> np.ndarray:
        return np.exp(self.log_probabilities)

    def probability(self, state_id: int) -> float:
        return float(np.exp(self.log_weights[state_id] - self.log_z))

    def mass(self, state_ids: Iterable[int]) -> float:
        ids = np.fromiter((int(i) for i in state_ids), dtype=np.int64)
        if ids.size == 0:
            return 0.0
        return float(np.exp(logsumexp(self.log_weights[ids]) - self.log_z))

    def _mask_array(self) -> np.ndarray:
        return np.fromiter(self.space.masks, dtype=np.int64, count=len(self.space))

    def node_activity(self) -> np.ndarray:
        """theta_v = P(v is active) for every vertex."""
        masks, probabilities = self._mask_array(), self.probabilities
        n = self.space.graph.n_vertices
        return np.array([probabilities[(masks >> v) & 1 == 1].sum() for v in range(n)])

    def node_unblocked(self) -> np.ndarray:
        """P(v and all its neighbours are idle) for every vertex."""
        masks, probabilities = self._mask_array(), self.probabilities
        g = self.space.graph
        return np.array([
            probabilities[masks & g.closed_neighborhood_mask(v) == 0].sum()
            for v in range(g.n_vertices)
        ])


def stationary_law(
    space: StateSpace,
    sigma: Optional[float] = None,
    per_vertex_sigma: Optional[Sequence[float]] = None,
) -> ActivityLaw:
    """
    Evaluate pi(x) = Z^-1 prod sigma_i^x_i over the whole state space.

    Exactly one of ``sigma`` (homogeneous) or ``per_vertex_sigma`` must be given.

    Raises:
        ConfigError: If a sigma is not positive or both/neither forms are given
    """
    if (sigma is None) == (per_vertex_sigma is None):
        raise ConfigError("pass either sigma or per_vertex_sigma")
    if sigma is not None:
        if not sigma > 0:
            raise ConfigError(f"sigma must be positive, got {sigma}")
        log_weights = space.sizes.astype(float) * math.log(sigma)
        per_vertex = None
    else:
        per_vertex = tuple(float(s) for s in per_vertex_sigma)
        if len(per_vertex) != space.graph.n_vertices:
            raise ConfigError("per_vertex_sigma needs one entry per vertex")
        if any(not s > 0 for s in per_vertex):
            raise ConfigError("every per-vertex sigma must be positive")
        logs = [math.log(s) for s in per_vertex]
        log_weights = np.array(
            [sum(logs[v] for v in VertexSet(m, len(logs))) for m in space.masks],
            dtype=float,
        )
    return ActivityLaw(
        space=space,
        sigma=sigma,
        per_vertex_sigma=per_vertex,
        log_weights=log_weights,
        log_z=float(logsumexp(log_weights)),
    )


def dominant_mass(law: ActivityLaw) -> float:
    """pi(E) + pi(O) for a torus law."""
    even_id, odd_id = law.space.dominant_ids()
    return law.probability(even_id) + law.probability(odd_id)


def state_space_to_document(space: StateSpace) -> StateSpaceDocument:
    """Fixture export: hex bit vectors plus flip-edge pairs (i < j)."""
    return StateSpaceDocument(
        n_vertices=space.graph.n_vertices,
        side=space.graph.side,
        states=[space.hex(i) for i in range(len(space))],
        flip_edges=[[i, j] for i, j in space.flip_edges() if i < j],
    )
