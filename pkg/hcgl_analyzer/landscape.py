"""
HCGL Analyzer Landscape - Communication heights, the set S and the reference path.

Heights are minimax values of the efficiency gap over single-flip paths. They
are found with a Dijkstra-style search where a path costs the largest gap it
visits (endpoints included), with ties broken by smaller state id.
"""

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from heapq import heappop, heappush
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from hcgl_core.configuration import Configuration, StateSpace, bottom, efficiency_gap
from hcgl_core.contours import CLASS_CODES, ClassificationCache, ConfigurationClass
from hcgl_core.errors import IdentityViolationError, PreconditionError
from hcgl_core.topology import ConflictGraph, VertexSet, dominant_sets

logger = logging.getLogger(__name__)

StateRef = Union[Configuration, VertexSet, int]


@dataclass(frozen=True)
class FlipPath:
    """
    A sequence of configurations where consecutive members differ by one vertex.

    ``landmarks`` names notable positions along the path (index into ``states``).
    """

    states: Tuple[Configuration, ...]
    peak_gap: int
    landmarks: Dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.states)

    def gaps(self) -> List[int]:
        side = self.states[0].graph.require_torus()
        return [efficiency_gap(s, side) for s in self.states]

    def is_valid(self) -> bool:
        return all(
            (a.mask ^ b.mask).bit_count() == 1 for a, b in zip(self.states, self.states[1:])
        )

    def hex_states(self) -> List[str]:
        return [s.occupied.to_hex() for s in self.states]


@dataclass(frozen=True)
class SetS:
    """S = {I : phi(E, I) <= L} with its inner and outer boundaries (state ids)."""

    side: int
    members: np.ndarray
    inner_boundary: np.ndarray
    outer_boundary: np.ndarray
    heights: np.ndarray = field(repr=False)

    def __contains__(self, state_id: int) -> bool:
        return bool(self.heights[state_id] <= self.side)

    def __len__(self) -> int:
        return int(self.members.size)


def _resolve(space: StateSpace, state: StateRef) -> int:
    if isinstance(state, (Configuration, VertexSet)):
        return space.state_id(state)
    return int(state)


def _bottleneck_search(
    space: StateSpace, source: int, target: Optional[int] = None
) -> Tuple[np.ndarray, np.ndarray]:
    gaps = space.gaps
    n = len(space)
    best = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
    parent = np.full(n, -1, dtype=np.int64)
    done = np.zeros(n, dtype=bool)

    best[source] = gaps[source]
    heap = [(int(gaps[source]), source)]
    while heap:
        key, u = heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if u == target:
            break
        for w in space.flip_neighbors(u):
            if done[w]:
                continue
            candidate = max(key, int(gaps[w]))
            if candidate < best[w]:
                best[w] = candidate
                parent[w] = u
                heappush(heap, (candidate, int(w)))
    return best, parent


def heights_from(space: StateSpace, source: StateRef) -> np.ndarray:
    """phi(source, I) for every state I of the space."""
    best, _ = _bottleneck_search(space, _resolve(space, source))
    return best


def communication_height(space: StateSpace, a: StateRef, b: StateRef) -> int:
    """
    Exact phi(a, b): the smallest possible peak gap over flip paths from a to b.

    Args:
        space: Enumerated torus state space
        a: Start state (Configuration, VertexSet or state id)
        b: End state

    Returns:
        int: Minimax efficiency gap, endpoints included
    """
    source, target = _resolve(space, a), _resolve(space, b)
    best, _ = _bottleneck_search(space, source, target)
    return int(best[target])


def optimal_path(space: StateSpace, a: StateRef, b: StateRef) -> FlipPath:
    """A flip path from a to b whose peak gap equals phi(a, b)."""
    source, target = _resolve(space, a), _resolve(space, b)
    best, parent = _bottleneck_search(space, source, target)
    ids = [target]
    while ids[-1] != source:
        ids.append(int(parent[ids[-1]]))
    ids.reverse()
    return FlipPath(
        states=tuple(space.configuration(i) for i in ids),
        peak_gap=int(best[target]),
    )


def _boundaries(space: StateSpace, inside: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    inner, outer = set(), set()
    for i in np.flatnonzero(inside):
        for j in space.flip_neighbors(int(i)):
            if not inside[j]:
                inner.add(int(i))
                outer.add(int(j))
    return np.array(sorted(inner), dtype=np.int64), np.array(sorted(outer), dtype=np.int64)


def _is_connected(space: StateSpace, inside: np.ndarray) -> bool:
    members = np.flatnonzero(inside)
    if members.size == 0:
        return True
    seen = {int(members[0])}
    frontier = deque(seen)
    while frontier:
        u = frontier.popleft()
        for w in space.flip_neighbors(u):
            w = int(w)
            if inside[w] and w not in seen:
                seen.add(w)
                frontier.append(w)
    return len(seen) == members.size


def build_set_S(
    space: StateSpace,
    cache: Optional[ClassificationCache] = None,
    check_classes: bool = True,
) -> SetS:
    """
    Build S = {I : phi(E, I) <= L} and its boundaries on the flip graph.

    Checks that E is in S, O is not, S is connected and, when
    ``check_classes`` is set, that S sits strictly inside Omega_cl.

    Raises:
        IdentityViolationError: If any of those properties fails
    """
    side = space.side
    even_id, odd_id = space.dominant_ids()
    heights = heights_from(space, even_id)
    inside = heights <= side
    inner, outer = _boundaries(space, inside)
    result = SetS(
        side=side,
        members=np.flatnonzero(inside),
        inner_boundary=inner,
        outer_boundary=outer,
        heights=heights,
    )

    violations = []

    def fail(kind: str, state_id: int, explanation: str) -> None:
        violations.append({
            "type": kind,
            "severity": "CRITICAL",
            "state_hex": space.hex(state_id),
            "explanation": explanation,
        })

    if not inside[even_id]:
        fail("set_s_missing_even", even_id, "E is not in S")
    if inside[odd_id]:
        fail("set_s_contains_odd", odd_id, "O is in S")
    if not _is_connected(space, inside):
        fail("set_s_disconnected", even_id, "S is not connected in the flip graph")
    if check_classes:
        cache = cache or ClassificationCache(space)
        codes = cache.classify_all()
        cluster = codes == CLASS_CODES[ConfigurationClass.OMEGA_CL]
        outside = np.flatnonzero(inside & ~cluster)
        if outside.size:
            fail("set_s_outside_omega_cl", int(outside[0]), "S contains a stripe or cross")
        if np.array_equal(inside, cluster):
            fail("set_s_equals_omega_cl", even_id, "S coincides with Omega_cl")
    if violations:
        raise IdentityViolationError(violations)

    logger.info(
        "set S: %d states, |inner|=%d, |outer|=%d",
        result.members.size, inner.size, outer.size,
    )
    return result


def set_S_prime(space: StateSpace) -> np.ndarray:
    """Mirror image of S around O: state ids with phi(O, I) <= L."""
    _, odd_id = space.dominant_ids()
    return np.flatnonzero(heights_from(space, odd_id) <= space.side)


def bottom_gap(space: StateSpace, state_ids) -> int:
    """Delta(F(A))."""
    members = bottom(space, state_ids)
    if not members:
        raise PreconditionError("the bottom of an empty set is undefined")
    return int(space.gaps[members[0]])


def depth(space: StateSpace, s: SetS) -> int:
    """D(S) = Delta(F(outer boundary)) - Delta(F(S))."""
    return bottom_gap(space, s.outer_boundary) - bottom_gap(space, s.members)


def is_non_trivial_cycle(space: StateSpace, s: SetS) -> bool:
    """A connected set whose highest state lies below the bottom of its outer boundary."""
    if not _is_connected(space, np.isin(np.arange(len(space)), s.members)):
        return False
    return int(space.gaps[s.members].max()) < bottom_gap(space, s.outer_boundary)


def reference_path(g: ConflictGraph) -> FlipPath:
    """
    Build an explicit E -> O flip path whose peak gap is L + 1.

    Starting from E: grow a vertical cluster of L/2 - 1 odd vertices in column
    1, free the two even vertices left of and right of the missing odd vertex
    (states I1, I2), add it to close a stripe (I3), then sweep the stripe
    column by column and finish with columns L - 1 and 0.
    """
    side = g.require_torus()
    even, _ = dominant_sets(g)
    current = even.bits
    masks = [current]

    def flip(x: int, y: int) -> None:
        nonlocal current
        current ^= 1 << g.vertex_id(x, y)
        masks.append(current)

    def occupy(x: int, y: int) -> None:
        for w in g.neighbors(g.vertex_id(x, y)):
            if current >> w & 1:
                wx, wy = g.vertex_coordinates(w)
                flip(wx, wy)
        flip(x, y)

    for y in range(0, side - 3, 2):
        occupy(1, y)
    flip(0, side - 2)
    landmarks = {"I1": len(masks) - 1}
    flip(2, side - 2)
    landmarks["I2"] = len(masks) - 1
    flip(1, side - 2)
    landmarks["I3"] = len(masks) - 1

    for c in range(2, side - 1):
        for y in range(side):
            if (c + y) % 2 == 1:
                flip(c + 1, y)
                flip(c, y)
    for c in (side - 1, 0):
        for y in range(side):
            if (c + y) % 2 == 1:
                flip(c, y)

    states = tuple(Configuration(VertexSet(m, g.n_vertices), g) for m in masks)
    peak = max(efficiency_gap(m, side) for m in masks)
    return FlipPath(states=states, peak_gap=peak, landmarks=landmarks)


def alpha(p: float, nu: float) -> float:
    """
    Finite-parameter proxy of log p / (log p - log nu).

    Zero whenever p = 1.
    """
    if p == 1:
        return 0.0
    denominator = math.log(p) - math.log(nu)
    if denominator == 0:
        raise PreconditionError("alpha is undefined when p equals nu")
    return math.log(p) / denominator


def hitting_time_slope(sigma_1: float, time_1: float, sigma_2: float, time_2: float) -> float:
    """Log-log slope of a mean hitting time between two sigma values."""
    if sigma_1 == sigma_2:
        raise PreconditionError("slope needs two distinct sigma values")
    return (math.log(time_2) - math.log(time_1)) / (math.log(sigma_2) - math.log(sigma_1))

