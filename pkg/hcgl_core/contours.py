"""
HCGL Core Contours - Region decomposition, dual-torus contours and classification.

Geometry is done in doubled integer coordinates modulo 2L: a primal vertex
(x, y) sits at (2x, 2y) and dual vertices sit at odd coordinates. Every cut
edge becomes one oriented dual edge with its region on the left, so contours
are walked as closed curves and winding numbers come from summed steps.
"""

import logging
from collections import deque
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from hcgl_core.configuration import Configuration, StateSpace, efficiency_gap
from hcgl_core.errors import PreconditionError
from hcgl_core.schemas import DecompositionDump, RegionDump
from hcgl_core.topology import (
    ConflictGraph,
    Parity,
    VertexSet,
    boundary_operators,
    dominant_sets,
)

logger = logging.getLogger(__name__)

Point = Tuple[int, int]
DualEdge = Tuple[Point, Point]  # (start, direction)

# Steps between odd vertices at distance 2 in G
_LAMBDA_STEPS = ((1, 1), (1, -1), (-1, 1), (-1, -1), (2, 0), (-2, 0), (0, 2), (0, -2))


class RegionClass(str, Enum):
    CLUSTER = "cluster"
    STRIPE = "stripe"
    CROSS = "cross"


class ConfigurationClass(str, Enum):
    OMEGA_CL = "omega_cl"
    OMEGA_S = "omega_s"
    OMEGA_CR = "omega_cr"


CLASS_CODES = {
    ConfigurationClass.OMEGA_CL: 0,
    ConfigurationClass.OMEGA_S: 1,
    ConfigurationClass.OMEGA_CR: 2,
}
_CODE_CLASSES = {code: klass for klass, code in CLASS_CODES.items()}


@dataclass(frozen=True)
class ContourCurve:
    """A closed curve on the dual torus, stored as (start, unit direction) pairs."""

    dual_edges: Tuple[DualEdge, ...]
    displacement: Point
    side: int

    @property
    def winding(self) -> Point:
        return (self.displacement[0] // (2 * self.side), self.displacement[1] // (2 * self.side))

    @property
    def is_closed(self) -> bool:
        period = 2 * self.side
        return self.displacement[0] % period == 0 and self.displacement[1] % period == 0

    @property
    def is_contractible(self) -> bool:
        return self.winding == (0, 0)

    @property
    def n_horizontal(self) -> int:
        return sum(1 for _, (_, dy) in self.dual_edges if dy == 0)

    @property
    def n_vertical(self) -> int:
        return sum(1 for _, (dx, _) in self.dual_edges if dx == 0)

    def __len__(self) -> int:
        return len(self.dual_edges)


@dataclass(frozen=True)
class Region:
    vertices: VertexSet
    parity: Parity
    cutset: Tuple[Tuple[int, int], ...]
    contour: Tuple[ContourCurve, ...]
    n_even: int
    n_odd: int
    klass: Optional[RegionClass] = None

    @property
    def contour_length(self) -> int:
        return sum(len(c) for c in self.contour)

    def windings(self) -> List[Point]:
        return [c.winding for c in self.contour]


@dataclass(frozen=True)
class RegionDecomposition:
    """
    Odd and even regions of one configuration.

    ``total_contour_length`` sums the odd-region contours, i.e. l(I).
    """

    occupied: VertexSet
    odd_regions: Tuple[Region, ...]
    even_regions: Tuple[Region, ...]
    total_contour_length: int


def _mask_of(state: Union[Configuration, VertexSet]) -> VertexSet:
    return state.occupied if isinstance(state, Configuration) else state


def _components(g: ConflictGraph, mask: int) -> List[int]:
    """Connected components of the subgraph of ``g`` induced by ``mask``."""
    remaining = mask
    found = []
    while remaining:
        seed = (remaining & -remaining).bit_length() - 1
        component = 1 << seed
        frontier = deque([seed])
        while frontier:
            v = frontier.popleft()
            fresh = g.neighbor_masks[v] & mask & ~component
            while fresh:
                low = fresh & -fresh
                component |= low
                frontier.append(low.bit_length() - 1)
                fresh ^= low
        found.append(component)
        remaining &= ~component
    return found


def _unit_step(a: int, b: int, side: int) -> int:
    d = (b - a) % side
    return -1 if d == side - 1 else d


def _left(d: Point) -> Point:
    return (-d[1], d[0])


def contour_curves(g: ConflictGraph, cutset: List[Tuple[int, int]]) -> List[ContourCurve]:
    """
    Turn a cutset (inside, outside) into closed dual curves with the region on the left.

    At dual vertices carrying four contour edges the walk turns left first.
    """
    side = g.require_torus()
    period = 2 * side
    starts: List[Point] = []
    directions: List[Point] = []
    outgoing: Dict[Point, List[int]] = {}
    for u, w in cutset:
        ux, uy = g.vertex_coordinates(u)
        wx, wy = g.vertex_coordinates(w)
        d = (_unit_step(ux, wx, side), _unit_step(uy, wy, side))
        t = _left(d)
        mid = (2 * ux + d[0], 2 * uy + d[1])
        start = ((mid[0] - t[0]) % period, (mid[1] - t[1]) % period)
        outgoing.setdefault(start, []).append(len(starts))
        starts.append(start)
        directions.append(t)

    used = [False] * len(starts)
    curves = []
    for first in range(len(starts)):
        if used[first]:
            continue
        edges = []
        dx = dy = 0
        e = first
        while True:
            used[e] = True
            t = directions[e]
            edges.append((starts[e], t))
            dx += 2 * t[0]
            dy += 2 * t[1]
            end = ((starts[e][0] + 2 * t[0]) % period, (starts[e][1] + 2 * t[1]) % period)
            options = [f for f in outgoing.get(end, []) if not used[f] or f == first]
            if not options:
                raise RuntimeError(f"contour walk dead-ends at dual vertex {end}")
            left, right = _left(t), (t[1], -t[0])
            rank = {left: 0, right: 1, t: 2}
            e = min(options, key=lambda f: (rank.get(directions[f], 3), f))
            if e == first:
                break
        curves.append(ContourCurve(dual_edges=tuple(edges), displacement=(dx, dy), side=side))
    return curves


def _build_region(g: ConflictGraph, mask: int, parity: Parity) -> Region:
    vertices = VertexSet(mask, g.n_vertices)
    even, odd = dominant_sets(g)
    cut = boundary_operators(g, vertices).edge_cut
    return Region(
        vertices=vertices,
        parity=parity,
        cutset=tuple(cut),
        contour=tuple(contour_curves(g, cut)),
        n_even=(mask & even.bits).bit_count(),
        n_odd=(mask & odd.bits).bit_count(),
    )


def has_noncontractible_odd_cycle(g: ConflictGraph, odd_vertices: VertexSet) -> bool:
    """
    True iff the distance-2 graph on ``odd_vertices`` has a non-contractible cycle.

    A breadth-first lift assigns integer coordinates; a non-tree edge whose
    lifted endpoints disagree (by a multiple of L) closes a winding cycle.
    Parallel edges on small tori are kept distinct.
    """
    g.require_torus()
    members = odd_vertices.bits
    lift: Dict[int, Point] = {}
    for root in odd_vertices:
        if root in lift:
            continue
        lift[root] = g.vertex_coordinates(root)
        frontier = deque([root])
        while frontier:
            u = frontier.popleft()
            ux, uy = lift[u]
            for sx, sy in _LAMBDA_STEPS:
                w = g.vertex_id(ux + sx, uy + sy)
                if not members >> w & 1:
                    continue
                target = (ux + sx, uy + sy)
                if w not in lift:
                    lift[w] = target
                    frontier.append(w)
                elif lift[w] != target:
                    return True
    return False


def classify_region(r: Region, g: ConflictGraph) -> RegionClass:
    """
    Classify an odd region.

    Stripe if a contour curve winds, else Cross if its occupied odd vertices
    carry a non-contractible distance-2 cycle, else Cluster.
    """
    if any(not c.is_contractible for c in r.contour):
        return RegionClass.STRIPE
    _, odd = dominant_sets(g)
    if has_noncontractible_odd_cycle(g, r.vertices & odd):
        return RegionClass.CROSS
    return RegionClass.CLUSTER


def decompose(g: ConflictGraph, state: Union[Configuration, VertexSet]) -> RegionDecomposition:
    """
    Split a torus configuration into odd and even regions.

    Odd regions are the components of I^O ∪ (E \\ I^E), even regions those of
    its complement; connectivity is taken in ``g``.

    Args:
        g: Torus conflict graph
        state: Independent set of ``g``

    Returns:
        RegionDecomposition with cutsets, contours and odd-region classes
    """
    g.require_torus()
    occupied = _mask_of(state)
    even, odd = dominant_sets(g)
    bits = occupied.bits
    odd_part = (bits & odd.bits) | (even.bits & ~bits)
    even_part = ((1 << g.n_vertices) - 1) & ~odd_part

    odd_regions = []
    for mask in _components(g, odd_part):
        region = _build_region(g, mask, Parity.ODD)
        odd_regions.append(replace(region, klass=classify_region(region, g)))
    even_regions = [_build_region(g, mask, Parity.EVEN) for mask in _components(g, even_part)]
    return RegionDecomposition(
        occupied=occupied,
        odd_regions=tuple(odd_regions),
        even_regions=tuple(even_regions),
        total_contour_length=sum(r.contour_length for r in odd_regions),
    )


def total_contour_length(g: ConflictGraph, state: Union[Configuration, VertexSet]) -> int:
    return decompose(g, state).total_contour_length


def classify_configuration(
    g: ConflictGraph,
    state: Union[Configuration, VertexSet],
    decomposition: Optional[RegionDecomposition] = None,
) -> ConfigurationClass:
    """Omega_s if any region is a stripe, else Omega_cr if any is a cross, else Omega_cl."""
    decomposition = decomposition or decompose(g, state)
    classes = {r.klass for r in decomposition.odd_regions}
    if RegionClass.STRIPE in classes:
        return ConfigurationClass.OMEGA_S
    if RegionClass.CROSS in classes:
        return ConfigurationClass.OMEGA_CR
    return ConfigurationClass.OMEGA_CL


class ClassificationCache:
    """Lazily computed configuration classes over a state space."""

    def __init__(self, space: StateSpace):
        self.space = space
        self._codes = np.full(len(space), -1, dtype=np.int8)

    def klass(self, state_id: int) -> ConfigurationClass:
        code = self._codes[state_id]
        if code < 0:
            mask = VertexSet(self.space.masks[state_id], self.space.graph.n_vertices)
            klass = classify_configuration(self.space.graph, mask)
            self._codes[state_id] = CLASS_CODES[klass]
            return klass
        return _CODE_CLASSES[int(code)]

    def remember(self, state_id: int, klass: ConfigurationClass) -> None:
        self._codes[state_id] = CLASS_CODES[klass]

    def classify_all(self) -> np.ndarray:
        """Class code of every state (0 = cl, 1 = s, 2 = cr)."""
        for i in np.flatnonzero(self._codes < 0):
            self.klass(int(i))
        logger.debug("classified %d states", len(self.space))
        return self._codes.copy()

    def members(self, klass: ConfigurationClass) -> np.ndarray:
        return np.flatnonzero(self.classify_all() == CLASS_CODES[klass])


def critical_cross_witnesses(
    space: StateSpace, state_id: int, cache: Optional[ClassificationCache] = None
) -> List[int]:
    """Single-flip neighbors of a cross configuration that lie in Omega_cl."""
    cache = cache or ClassificationCache(space)
    if cache.klass(state_id) is not ConfigurationClass.OMEGA_CR:
        raise PreconditionError(f"state 0x{space.hex(state_id)} is not in Omega_cr")
    return [
        int(j) for j in space.flip_neighbors(state_id)
        if cache.klass(int(j)) is ConfigurationClass.OMEGA_CL
    ]


def is_critical_cross(
    space: StateSpace,
    state: Union[Configuration, VertexSet, int],
    cache: Optional[ClassificationCache] = None,
) -> bool:
    """
    True iff a cross configuration is one flip away from Omega_cl.

    Raises:
        PreconditionError: If the state is not in Omega_cr
    """
    return bool(critical_cross_witnesses(space, space.state_id(state), cache))


def _region_dump(r: Region) -> RegionDump:
    return RegionDump(
        parity=r.parity.value,
        vertices=list(r.vertices),
        n_even=r.n_even,
        n_odd=r.n_odd,
        cutset_size=len(r.cutset),
        contour_length=r.contour_length,
        windings=[list(w) for w in r.windings()],
        klass=r.klass.value if r.klass else None,
    )


def decomposition_to_document(
    space: StateSpace,
    state_id: int,
    decomposition: RegionDecomposition,
    klass: ConfigurationClass,
    critical: bool = False,
) -> DecompositionDump:
    return DecompositionDump(
        state_id=state_id,
        state_hex=space.hex(state_id),
        gap=efficiency_gap(space.masks[state_id], space.side),
        total_contour_length=decomposition.total_contour_length,
        configuration_class=klass.value,
        critical_cross=critical,
        odd_regions=[_region_dump(r) for r in decomposition.odd_regions],
        even_regions=[_region_dump(r) for r in decomposition.even_regions],
    )
