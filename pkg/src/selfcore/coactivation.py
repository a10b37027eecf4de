"""Co-activation matrices, strong-similarity graphs and block ordering.

Subnetworks are the connected components of the graph that keeps an edge
between two alive units whenever ``|R_ij| >= tau``. For display, components are
laid out largest first and each one is ordered internally by reverse
Cuthill-McKee so that its block sits tightly on the diagonal.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components as _cc

from .errors import DimensionMismatch, TauOutOfRange
from .traces import NormalizedTrace

DEFAULT_TAU = 0.70
# {0.50, 0.55, ..., 0.95, 0.99, 1.00}
DEFAULT_TAU_GRID = tuple(round(0.50 + 0.05 * k, 2) for k in range(10)) + (0.99, 1.00)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of two vectors; 0 if either is the zero vector.

    Identical inputs give exactly 1.0: ``sqrt(fl(x*x)) == x`` in IEEE arithmetic.
    """
    aa = float(np.dot(a, a))
    bb = float(np.dot(b, b))
    if aa == 0.0 or bb == 0.0:
        return 0.0
    c = float(np.dot(a, b)) / np.sqrt(aa * bb)
    return float(min(1.0, max(-1.0, c)))


def cosine_matrix(a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """All-pairs cosine between the rows of ``a`` and the rows of ``b``.

    Zero rows produce zero rows/columns. With ``b`` omitted the result is exactly
    symmetric with a unit diagonal on non-zero rows.
    """
    a = np.asarray(a, dtype=np.float64)
    if b is None:
        g = a @ a.T
        g = 0.5 * (g + g.T)
        sq = np.diag(g).copy()
        norms = np.sqrt(sq)
        nz = norms > 0
        out = np.zeros_like(g)
        out[np.ix_(nz, nz)] = g[np.ix_(nz, nz)] / np.outer(norms[nz], norms[nz])
        np.clip(out, -1.0, 1.0, out=out)
        out[nz, nz] = 1.0
        return out
    b = np.asarray(b, dtype=np.float64)
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"row lengths differ: {a.shape[1]} vs {b.shape[1]}")
    g = a @ b.T
    na = np.sqrt(np.einsum("ij,ij->i", a, a))
    nb = np.sqrt(np.einsum("ij,ij->i", b, b))
    denom = np.outer(na, nb)
    out = np.divide(g, denom, out=np.zeros_like(g), where=denom > 0)
    return np.clip(out, -1.0, 1.0)


@dataclass
class SimilarityMatrix:
    values: np.ndarray
    alive_mask: np.ndarray

    @property
    def H(self) -> int:
        return self.values.shape[0]

    @property
    def abs(self) -> np.ndarray:
        return np.abs(self.values)


@dataclass
class StrengthGraph:
    """Undirected graph over the alive units of one layer (no self-loops)."""

    adjacency: sparse.csr_matrix
    alive_mask: np.ndarray
    tau: float

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        return self.adjacency.nnz // 2

    def neighbors(self, i: int) -> np.ndarray:
        a = self.adjacency
        return a.indices[a.indptr[i] : a.indptr[i + 1]]

    def degree(self, i: int) -> int:
        return int(self.adjacency.indptr[i + 1] - self.adjacency.indptr[i])

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], alive_mask=None, tau: float = 1.0):
        edges = [(int(i), int(j)) for i, j in edges if i != j]
        rows = [i for i, j in edges] + [j for i, j in edges]
        cols = [j for i, j in edges] + [i for i, j in edges]
        adj = sparse.csr_matrix((np.ones(len(rows), dtype=bool), (rows, cols)), shape=(n, n), dtype=bool)
        adj.sum_duplicates()
        adj.sort_indices()
        mask = np.ones(n, dtype=bool) if alive_mask is None else np.asarray(alive_mask, dtype=bool)
        return cls(adjacency=adj, alive_mask=mask, tau=tau)


@dataclass
class SubnetworkPartition:
    groups: list[list[int]]
    tau: float
    dead: list[int] = field(default_factory=list)

    @property
    def self_group(self) -> list[int]:
        return self.groups[0] if self.groups else []

    @property
    def sizes(self) -> list[int]:
        return [len(g) for g in self.groups]

    @property
    def n_alive(self) -> int:
        return sum(self.sizes)

    def labels(self, H: int) -> np.ndarray:
        """Group index per unit, -1 for dead units."""
        lab = np.full(H, -1, dtype=int)
        for k, g in enumerate(self.groups):
            lab[g] = k
        return lab

    def as_sets(self) -> set[frozenset]:
        return {frozenset(g) for g in self.groups}


@dataclass
class NeuronOrdering:
    perm: np.ndarray
    block_boundaries: list[int]


def coactivation_matrix(trace: NormalizedTrace) -> SimilarityMatrix:
    """Signed neuron-neuron cosine matrix; dead rows and columns are zero."""
    x = np.where(trace.alive_mask[:, None], trace.values, 0.0)
    return SimilarityMatrix(values=cosine_matrix(x), alive_mask=trace.alive_mask.copy())


def threshold_graph(sim: SimilarityMatrix, tau: float = DEFAULT_TAU) -> StrengthGraph:
    """Keep edge (i, j) iff i != j, both alive and ``|R_ij| >= tau``."""
    if not (0.0 < tau <= 1.0):
        raise TauOutOfRange(f"tau must lie in (0, 1], got {tau}")
    alive = sim.alive_mask
    keep = np.abs(sim.values) >= tau
    keep &= alive[:, None] & alive[None, :]
    np.fill_diagonal(keep, False)
    adj = sparse.csr_matrix(keep)
    adj.sort_indices()
    return StrengthGraph(adjacency=adj, alive_mask=alive.copy(), tau=tau)


def _sort_groups(groups: Iterable[Iterable[int]]) -> list[list[int]]:
    groups = [sorted(int(i) for i in g) for g in groups]
    groups = [g for g in groups if g]
    groups.sort(key=lambda g: (-len(g), g[0]))
    return groups


def connected_components(graph: StrengthGraph) -> SubnetworkPartition:
    """Exact connected components over alive units, largest first.

    Equal sizes are ordered by their smallest member index.
    """
    alive = np.flatnonzero(graph.alive_mask)
    dead = np.flatnonzero(~graph.alive_mask).tolist()
    if alive.size == 0:
        return SubnetworkPartition(groups=[], tau=graph.tau, dead=dead)
    sub = graph.adjacency[alive][:, alive]
    _, labels = _cc(sub, directed=False)
    buckets: dict[int, list[int]] = {}
    for idx, lab in zip(alive.tolist(), labels.tolist()):
        buckets.setdefault(lab, []).append(idx)
    return SubnetworkPartition(groups=_sort_groups(buckets.values()), tau=graph.tau, dead=dead)


def _bfs_levels(graph: StrengthGraph, start: int, members: set[int]) -> list[list[int]]:
    levels = [[start]]
    seen = {start}
    while True:
        nxt = []
        for u in levels[-1]:
            for v in graph.neighbors(u).tolist():
                if v in members and v not in seen:
                    seen.add(v)
                    nxt.append(v)
        if not nxt:
            return levels
        levels.append(sorted(nxt))


def pseudo_peripheral_vertex(graph: StrengthGraph, members: Sequence[int]) -> int:
    """George-Liu double-BFS heuristic, starting from the smallest index."""
    mset = set(int(m) for m in members)
    deg = {m: sum(1 for v in graph.neighbors(m).tolist() if v in mset) for m in mset}
    r = min(mset)
    levels = _bfs_levels(graph, r, mset)
    while True:
        last = levels[-1]
        cand = min(last, key=lambda v: (deg[v], v))
        cand_levels = _bfs_levels(graph, cand, mset)
        if len(cand_levels) > len(levels):
            r, levels = cand, cand_levels
        else:
            return r


def rcm_order(graph: StrengthGraph, component: Sequence[int]) -> list[int]:
    """Reverse Cuthill-McKee ordering of one connected component.

    Neighbours are enqueued by increasing degree, ties by index.
    """
    members = sorted(int(m) for m in component)
    if len(members) <= 1:
        return members
    mset = set(members)
    deg = {m: sum(1 for v in graph.neighbors(m).tolist() if v in mset) for m in members}
    start = pseudo_peripheral_vertex(graph, members)
    order = []
    seen = {start}
    queue = deque([start])
    while len(order) < len(members):
        if not queue:
            # component argument was not connected; restart from the next unvisited vertex
            rest = [m for m in members if m not in seen]
            s = pseudo_peripheral_vertex(graph, _reachable(graph, rest[0], set(rest)))
            seen.add(s)
            queue.append(s)
        u = queue.popleft()
        order.append(u)
        nbrs = [v for v in graph.neighbors(u).tolist() if v in mset and v not in seen]
        nbrs.sort(key=lambda v: (deg[v], v))
        for v in nbrs:
            seen.add(v)
            queue.append(v)
    return order[::-1]


def _reachable(graph: StrengthGraph, start: int, members: set[int]) -> list[int]:
    return [v for lvl in _bfs_levels(graph, start, members) for v in lvl]


def bandwidth(graph: StrengthGraph, order: Sequence[int]) -> int:
    """Max ``|pos(u) - pos(v)|`` over edges with both ends in ``order``."""
    pos = {int(v): k for k, v in enumerate(order)}
    coo = sparse.triu(graph.adjacency, k=1).tocoo()
    bw = 0
    for u, v in zip(coo.row.tolist(), coo.col.tolist()):
        if u in pos and v in pos:
            bw = max(bw, abs(pos[u] - pos[v]))
    return bw


def block_layout(partition: SubnetworkPartition, graph: StrengthGraph) -> NeuronOrdering:
    perm: list[int] = []
    bounds = []
    for g in partition.groups:
        perm.extend(rcm_order(graph, g))
        bounds.append(len(perm))
    perm.extend(sorted(partition.dead))
    return NeuronOrdering(perm=np.asarray(perm, dtype=int), block_boundaries=bounds)


def reorder(matrix: np.ndarray, ordering: NeuronOrdering) -> np.ndarray:
    p = ordering.perm
    return np.asarray(matrix)[np.ix_(p, p)]


def partition_trace(trace: NormalizedTrace, tau: float = DEFAULT_TAU):
    """Convenience: matrix, graph and partition for one normalized trace."""
    sim = coactivation_matrix(trace)
    graph = threshold_graph(sim, tau)
    return sim, graph, connected_components(graph)
