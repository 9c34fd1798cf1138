"""Graph representation and the connectivity primitives used everywhere else.

Vertices are the integers ``0..n-1``; the integer order doubles as the total
vertex order the level process scans in. Vertex sets are plain ``frozenset``
objects at this layer and boolean masks inside compiled code.
"""

from __future__ import annotations

import math
from collections import deque
from collections.abc import Iterable
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from . import _kernels as K
from .errors import GraphError

VertexSet = frozenset

INF = math.inf


@dataclass(frozen=True, eq=False)
class Graph:
    """Connected, simple, undirected graph with sorted adjacency lists."""

    n: int
    adjacency: tuple[tuple[int, ...], ...]
    name: str = ""
    indptr: np.ndarray = field(init=False, repr=False)
    indices: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise GraphError("graph needs at least one vertex")
        if len(self.adjacency) != self.n:
            raise GraphError("adjacency length does not match vertex count")
        for v, nbrs in enumerate(self.adjacency):
            if list(nbrs) != sorted(set(nbrs)):
                raise GraphError(f"neighbours of {v} not sorted or repeated")
            for w in nbrs:
                if not 0 <= w < self.n:
                    raise GraphError(f"neighbour {w} of {v} out of range")
                if w == v:
                    raise GraphError(f"loop at vertex {v}")
                if v not in self.adjacency[w]:
                    raise GraphError(f"edge {v}-{w} is not symmetric")
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(a) for a in self.adjacency])
        indices = np.fromiter((w for a in self.adjacency for w in a), dtype=np.int64, count=int(indptr[-1]))
        indptr.setflags(write=False)
        indices.setflags(write=False)
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)
        if not K.is_connected(indptr, indices, np.ones(self.n, dtype=np.bool_)):
            raise GraphError("graph is disconnected")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], name: str = "") -> Graph:
        nbrs: list[set[int]] = [set() for _ in range(n)]
        for u, v in edges:
            if u == v:
                raise GraphError(f"loop at vertex {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise GraphError(f"edge {u}-{v} out of range")
            if v in nbrs[u]:
                raise GraphError(f"duplicate edge {u}-{v}")
            nbrs[u].add(v)
            nbrs[v].add(u)
        return cls(n, tuple(tuple(sorted(s)) for s in nbrs), name)

    @property
    def num_edges(self) -> int:
        return int(self.indptr[-1]) // 2

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u, nbrs in enumerate(self.adjacency) for v in nbrs if u < v]

    def mask(self, s: Iterable[int]) -> np.ndarray:
        m = np.zeros(self.n, dtype=np.bool_)
        idx = list(s)
        if idx:
            arr = np.asarray(idx, dtype=np.int64)
            if arr.min() < 0 or arr.max() >= self.n:
                raise ValueError("vertex out of range")
            m[arr] = True
        return m

    @cached_property
    def diameter(self) -> int:
        return int(all_pairs_distances(self).max())

    def __repr__(self) -> str:
        return f"Graph(name={self.name!r}, n={self.n}, m={self.num_edges})"


def build_grid(width: int, height: int) -> Graph:
    """Grid graph with row-major numbering ``id = row * width + col``."""
    if width < 1 or height < 1:
        raise ValueError(f"grid dimensions must be positive, got {width}x{height}")
    edges = []
    for row in range(height):
        for col in range(width):
            v = row * width + col
            if col + 1 < width:
                edges.append((v, v + 1))
            if row + 1 < height:
                edges.append((v, v + width))
    return Graph.from_edges(width * height, edges, name=f"grid:{width}x{height}")


def parse_edge_list(text: str | bytes, name: str = "") -> Graph:
    """Parse the ``n m`` header + ``u v`` lines format; ``#`` starts a comment line."""
    if isinstance(text, bytes):
        text = text.decode()
    header = None
    edges: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    n = m = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphError(f"expected two integers, got {line!r}", lineno)
        try:
            a, b = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphError(f"expected two integers, got {line!r}", lineno) from None
        if header is None:
            if a < 1 or b < 0:
                raise GraphError(f"bad header {line!r}", lineno)
            header = lineno
            n, m = a, b
            continue
        if not (0 <= a < n and 0 <= b < n):
            raise GraphError(f"endpoint out of range [0, {n})", lineno)
        if a == b:
            raise GraphError(f"loop at vertex {a}", lineno)
        key = (min(a, b), max(a, b))
        if key in seen:
            raise GraphError(f"duplicate edge {a} {b}", lineno)
        seen.add(key)
        edges.append(key)
    if header is None:
        raise GraphError("missing header line")
    if len(edges) != m:
        raise GraphError(f"header declares {m} edges but {len(edges)} were given")
    try:
        return Graph.from_edges(n, edges, name=name)
    except GraphError as exc:
        raise GraphError(str(exc)) from None


def load_graph(spec: str) -> Graph:
    """Resolve ``grid:WxH`` shorthand or an edge-list file path."""
    if spec.startswith("grid:"):
        try:
            w, h = (int(x) for x in spec[5:].lower().split("x"))
        except ValueError:
            raise GraphError(f"bad grid spec {spec!r}, expected grid:WxH") from None
        if w < 1 or h < 1:
            raise GraphError(f"grid dimensions must be positive, got {w}x{h}")
        return build_grid(w, h)
    with open(spec, "rb") as fh:
        return parse_edge_list(fh.read(), name=spec)


def all_pairs_distances(g: Graph) -> np.ndarray:
    """Hop-distance matrix (int32, read-only)."""
    adj = csr_matrix((np.ones(len(g.indices)), g.indices, g.indptr), shape=(g.n, g.n))
    dist = shortest_path(adj, method="D", unweighted=True, directed=False)
    out = dist.astype(np.int32)
    out.setflags(write=False)
    return out


def set_distance(dm: np.ndarray, v: int, s: Iterable[int]) -> float | int:
    members = list(s)
    if not members:
        return INF
    return int(dm[v, members].min())


def is_connected_induced(g: Graph, s: Iterable[int]) -> bool:
    return bool(K.is_connected(g.indptr, g.indices, g.mask(s)))


def reach_within(g: Graph, allowed: Iterable[int], start: int) -> frozenset[int]:
    allowed_mask = g.mask(allowed)
    if not (0 <= start < g.n and allowed_mask[start]):
        raise ValueError(f"start vertex {start} not in allowed set")
    seen = K.reach(g.indptr, g.indices, allowed_mask, start)
    return frozenset(np.flatnonzero(seen).tolist())


def connected_components(g: Graph, s: Iterable[int]) -> list[frozenset[int]]:
    """Components of the induced subgraph, ordered by smallest vertex."""
    remaining = g.mask(s)
    allowed = remaining.copy()
    comps = []
    for v in range(g.n):
        if remaining[v]:
            seen = K.reach(g.indptr, g.indices, allowed, v)
            remaining &= ~seen
            comps.append(frozenset(np.flatnonzero(seen).tolist()))
    return comps


def _lowpoint(g: Graph, s: Iterable[int]):
    m = g.mask(s)
    members = np.flatnonzero(m)
    if len(members) == 0:
        raise ValueError("vertex set is empty")
    root = int(members[0])
    out = K.lowpoint(g.indptr, g.indices, m, root, np.zeros(g.n, np.bool_))
    if not np.array_equal(out[4], m):
        raise ValueError("induced subgraph is disconnected")
    return out


def cut_vertices(g: Graph, s: Iterable[int]) -> frozenset[int]:
    """Articulation points of the (connected) induced subgraph on ``s``."""
    cut = _lowpoint(g, s)[0]
    return frozenset(np.flatnonzero(cut).tolist())


def biconnected_components(g: Graph, s: Iterable[int]) -> list[frozenset[int]]:
    s = frozenset(s)
    if len(s) < 2:
        raise ValueError("biconnected components need at least two vertices")
    _, _, bv, bp, _ = _lowpoint(g, s)
    return [frozenset(bv[bp[j] : bp[j + 1]].tolist()) for j in range(len(bp) - 1)]


def bfs_distances(g: Graph, source: int) -> list[int]:
    """Single-source hop distances by plain BFS (reference path for tests and tools)."""
    dist = [-1] * g.n
    dist[source] = 0
    queue = deque([source])
    while queue:
        v = queue.popleft()
        for w in g.adjacency[v]:
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                queue.append(w)
    return dist
