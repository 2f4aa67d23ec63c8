"""
HCGL Core Topology - Conflict graphs, vertex sets and boundary operators.

The even L x L torus is the reference conflict graph. Vertex ids are fixed as
``id = x + y * L`` so that every downstream artifact (paths, dumps, reports)
refers to the same numbering.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

from hcgl_core.errors import ConfigError, PreconditionError
from hcgl_core.schemas import GraphDocument


class GraphKind(str, Enum):
    TORUS = "torus"
    GENERAL = "general"


class Parity(str, Enum):
    EVEN = "even"
    ODD = "odd"


@dataclass(frozen=True)
class VertexSet:
    """
    Subset of the vertices of a conflict graph, stored as a fixed-width bit vector.

    Bit ``v`` of ``bits`` is set iff vertex ``v`` belongs to the set.
    """

    bits: int
    width: int

    def __post_init__(self):
        if self.bits < 0 or self.bits >> self.width:
            raise ConfigError(f"bit vector 0x{self.bits:x} does not fit in {self.width} bits")

    @classmethod
    def empty(cls, width: int) -> "VertexSet":
        return cls(0, width)

    @classmethod
    def full(cls, width: int) -> "VertexSet":
        return cls((1 << width) - 1, width)

    @classmethod
    def from_ids(cls, ids: Iterable[int], width: int) -> "VertexSet":
        bits = 0
        for v in ids:
            if not 0 <= v < width:
                raise ConfigError(f"vertex {v} out of range for width {width}")
            bits |= 1 << v
        return cls(bits, width)

    @classmethod
    def from_hex(cls, text: str, width: int) -> "VertexSet":
        try:
            bits = int(text, 16)
        except ValueError as e:
            raise ConfigError(f"not a hex bit vector: {text!r}") from e
        return cls(bits, width)

    def to_hex(self) -> str:
        digits = max(1, (self.width + 3) // 4)
        return f"{self.bits:0{digits}x}"

    def _check(self, other: "VertexSet") -> None:
        if other.width != self.width:
            raise PreconditionError(f"width mismatch: {self.width} vs {other.width}")

    def __or__(self, other: "VertexSet") -> "VertexSet":
        self._check(other)
        return VertexSet(self.bits | other.bits, self.width)

    def __and__(self, other: "VertexSet") -> "VertexSet":
        self._check(other)
        return VertexSet(self.bits & other.bits, self.width)

    def __sub__(self, other: "VertexSet") -> "VertexSet":
        self._check(other)
        return VertexSet(self.bits & ~other.bits, self.width)

    def __xor__(self, other: "VertexSet") -> "VertexSet":
        self._check(other)
        return VertexSet(self.bits ^ other.bits, self.width)

    def complement(self) -> "VertexSet":
        return VertexSet(((1 << self.width) - 1) & ~self.bits, self.width)

    def __contains__(self, v: int) -> bool:
        return 0 <= v < self.width and bool(self.bits >> v & 1)

    def __iter__(self) -> Iterator[int]:
        bits = self.bits
        while bits:
            low = bits & -bits
            yield low.bit_length() - 1
            bits ^= low

    def __len__(self) -> int:
        return self.bits.bit_count()

    def __bool__(self) -> bool:
        return self.bits != 0


@dataclass(frozen=True)
class ConflictGraph:
    """
    Undirected conflict graph.

    ``adjacency`` holds sorted neighbor tuples; ``parity`` is only set for tori.
    Instances are immutable and can be shared across workers.
    """

    n_vertices: int
    adjacency: Tuple[Tuple[int, ...], ...]
    kind: GraphKind
    side: Optional[int] = None
    parity: Optional[Tuple[Parity, ...]] = None
    neighbor_masks: Tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.adjacency) != self.n_vertices:
            raise ConfigError(
                f"adjacency lists {len(self.adjacency)} entries for {self.n_vertices} vertices"
            )
        for v, nbrs in enumerate(self.adjacency):
            for w in nbrs:
                if w == v:
                    raise ConfigError(f"self-loop at vertex {v}")
                if not 0 <= w < self.n_vertices:
                    raise ConfigError(f"vertex {v} has out-of-range neighbor {w}")
                if v not in self.adjacency[w]:
                    raise ConfigError(f"edge ({v},{w}) is not symmetric")
        masks = tuple(sum(1 << w for w in nbrs) for nbrs in self.adjacency)
        object.__setattr__(self, "neighbor_masks", masks)

    @property
    def is_torus(self) -> bool:
        return self.kind is GraphKind.TORUS

    def neighbors(self, v: int) -> Tuple[int, ...]:
        return self.adjacency[v]

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def closed_neighborhood_mask(self, v: int) -> int:
        return self.neighbor_masks[v] | (1 << v)

    def edges(self) -> List[Tuple[int, int]]:
        return [(u, w) for u, nbrs in enumerate(self.adjacency) for w in nbrs if u < w]

    def require_torus(self) -> int:
        """Return L, or raise if this graph is not a torus."""
        if not self.is_torus or self.side is None:
            raise PreconditionError("operation is only defined on the even torus")
        return self.side

    def vertex_coordinates(self, v: int) -> Tuple[int, int]:
        side = self.require_torus()
        return v % side, v // side

    def vertex_id(self, x: int, y: int) -> int:
        side = self.require_torus()
        return (x % side) + (y % side) * side

    def vertex_set(self, ids: Iterable[int] = ()) -> VertexSet:
        return VertexSet.from_ids(ids, self.n_vertices)


@dataclass(frozen=True)
class BoundaryOperators:
    inner: VertexSet
    outer: VertexSet
    edge_cut: List[Tuple[int, int]]


def build_torus(side: int) -> ConflictGraph:
    """
    Build the even L x L toric grid.

    Args:
        side: L, even and at least 4

    Returns:
        ConflictGraph with L^2 vertices of degree 4

    Raises:
        ConfigError: If L is odd or smaller than 4
    """
    if side % 2 != 0 or side < 4:
        raise ConfigError(
            f"L={side} is not allowed: the torus side must be even and at least 4 "
            f"(parity rule: odd L breaks the even/odd bipartition, L=2 is excluded)"
        )
    adjacency = []
    parity = []
    for v in range(side * side):
        x, y = v % side, v // side
        nbrs = {
            (x + 1) % side + y * side,
            (x - 1) % side + y * side,
            x + ((y + 1) % side) * side,
            x + ((y - 1) % side) * side,
        }
        adjacency.append(tuple(sorted(nbrs)))
        parity.append(Parity.EVEN if (x + y) % 2 == 0 else Parity.ODD)
    return ConflictGraph(
        n_vertices=side * side,
        adjacency=tuple(adjacency),
        kind=GraphKind.TORUS,
        side=side,
        parity=tuple(parity),
    )


def build_general(adjacency: Sequence[Iterable[int]]) -> ConflictGraph:
    """Build a general conflict graph from neighbor lists (validated symmetric)."""
    lists = tuple(tuple(sorted(set(nbrs))) for nbrs in adjacency)
    return ConflictGraph(n_vertices=len(lists), adjacency=lists, kind=GraphKind.GENERAL)


def boundary_operators(g: ConflictGraph, s: VertexSet) -> BoundaryOperators:
    """
    Compute the inner boundary, outer boundary and edge cut of ``s``.

    Returns:
        inner = vertices of s with a neighbor outside s,
        outer = vertices outside s with a neighbor in s,
        edge_cut = edges (inside, outside), ordered by inside vertex then outside
    """
    inner = 0
    outer = 0
    cut = []
    for v in s:
        outside = g.neighbor_masks[v] & ~s.bits
        if outside:
            inner |= 1 << v
            outer |= outside
            cut.extend((v, w) for w in g.adjacency[v] if outside >> w & 1)
    return BoundaryOperators(
        inner=VertexSet(inner, g.n_vertices),
        outer=VertexSet(outer, g.n_vertices),
        edge_cut=cut,
    )


def parity_set(g: ConflictGraph, parity: Parity) -> VertexSet:
    g.require_torus()
    return g.vertex_set(v for v, p in enumerate(g.parity) if p is parity)


def dominant_sets(g: ConflictGraph) -> Tuple[VertexSet, VertexSet]:
    """
    Return the two maximum independent sets (even class, odd class) of the torus.

    Raises:
        PreconditionError: On a general graph, where dominant states are undefined
    """
    return parity_set(g, Parity.EVEN), parity_set(g, Parity.ODD)


def graph_to_document(g: ConflictGraph) -> GraphDocument:
    if g.is_torus:
        return GraphDocument(kind=g.kind.value, side=g.side)
    return GraphDocument(kind=g.kind.value, adjacency=[list(n) for n in g.adjacency])


def graph_from_document(doc: GraphDocument) -> ConflictGraph:
    if doc.kind == GraphKind.TORUS.value:
        return build_torus(doc.side)
    return build_general(doc.adjacency)
