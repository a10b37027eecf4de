"""Cross-checkpoint neuron alignment.

Units of two checkpoints are paired by a maximum-similarity one-to-one
assignment on activation cosines; consecutive pairings along a chain are then
threaded into neuron families.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .coactivation import cosine_matrix
from .errors import ChainTooShort, EmptyMatrix, NonFiniteValue, ReferenceSetMismatch
from .traces import NormalizedTrace


@dataclass
class Matching:
    source_id: str
    target_id: str
    perm: dict[int, int]
    total_similarity: float


@dataclass
class Assignment:
    """Row -> column assignment of a rectangular score matrix (-1 = unassigned)."""

    cols: np.ndarray
    value: float


@dataclass
class FamilySet:
    chain: list[str]
    families: list[list[int | None]]
    matchings: list[Matching] = field(default_factory=list)

    @property
    def complete(self) -> list[int]:
        return [k for k, f in enumerate(self.families) if all(m is not None for m in f)]

    @property
    def incomplete(self) -> list[int]:
        return [k for k, f in enumerate(self.families) if any(m is None for m in f)]

    def complete_members(self) -> np.ndarray:
        """K x C integer array of unit indices for the complete families."""
        rows = [self.families[k] for k in self.complete]
        return np.asarray(rows, dtype=int).reshape(len(rows), len(self.chain))

    def to_dict(self) -> dict:
        return {"chain": list(self.chain), "families": [list(f) for f in self.families],
                "incomplete": self.incomplete}


def cross_similarity(a: NormalizedTrace, b: NormalizedTrace) -> np.ndarray:
    """Cosine matrix between alive rows of ``a`` (rows) and alive rows of ``b`` (columns)."""
    if a.T != b.T:
        raise ReferenceSetMismatch(f"traces use {a.T} and {b.T} reference states")
    ra, rb = a.base.reference_id, b.base.reference_id
    if ra is not None and rb is not None and ra != rb:
        raise ReferenceSetMismatch(f"reference sets differ: {ra!r} vs {rb!r}")
    return cosine_matrix(a.values[a.alive], b.values[b.alive])


def _solve_min_cost(cost: np.ndarray):
    """Shortest-augmenting-path Hungarian method for a square cost matrix.

    Returns ``(row_to_col, u, v)`` where ``u``/``v`` are optimal dual potentials
    (``cost[i, j] - u[i] - v[j] >= 0``, with equality on assigned pairs).
    """
    n = cost.shape[0]
    INF = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=int)  # p[j]: row (1-based) assigned to column j; 0 = free
    way = np.zeros(n + 1, dtype=int)
    c = np.zeros((n + 1, n + 1))
    c[1:, 1:] = cost
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, INF)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used
            free[0] = False
            cur = c[i0] - u[i0] - v
            better = free & (cur < minv)
            minv[better] = cur[better]
            way[better] = j0
            cand = np.where(free, minv, INF)
            j1 = int(np.argmin(cand))
            delta = cand[j1]
            u[p[used]] += delta
            v[used] -= delta
            minv[free] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    row_to_col = np.empty(n, dtype=int)
    for j in range(1, n + 1):
        row_to_col[p[j] - 1] = j - 1
    return row_to_col, u[1:], v[1:]


def _lexicographic_min(tight: list[list[int]], match: np.ndarray) -> np.ndarray:
    """Lexicographically smallest perfect matching inside the tight-edge graph.

    ``match`` must already be a perfect matching using tight edges. Rows are fixed
    in order; each is moved to its smallest feasible column by an alternating
    path through the not-yet-fixed rows.
    """
    n = len(match)
    match = match.copy()
    owner = np.empty(n, dtype=int)
    owner[match] = np.arange(n)
    fixed_col = np.zeros(n, dtype=bool)

    def reroute(row: int, target_col: int, banned: int, limit: int) -> bool:
        # find alternating path from `row` ending at free column `target_col`
        seen = set()
        stack = [(row, iter(tight[row]))]
        parent: dict[int, tuple[int, int]] = {}
        while stack:
            r, it = stack[-1]
            advanced = False
            for c in it:
                if c == banned or fixed_col[c] or c in seen:
                    continue
                seen.add(c)
                if c == target_col:
                    # unwind: r takes c, each parent row takes its child's column
                    path = [(r, c)]
                    while r in parent:
                        pr, pc = parent[r]
                        path.append((pr, pc))
                        r = pr
                    for rr, cc in path:
                        match[rr] = cc
                        owner[cc] = rr
                    return True
                nr = owner[c]
                if nr <= limit:
                    continue
                parent[nr] = (r, c)
                stack.append((nr, iter(tight[nr])))
                advanced = True
                break
            if not advanced:
                stack.pop()
        return False

    for i in range(n):
        for j in tight[i]:
            if fixed_col[j]:
                continue
            if match[i] == j:
                break
            displaced = owner[j]
            if displaced <= i:
                continue
            old = match[i]
            # tentatively give j to row i; displaced row must reach i's old column
            match[i] = j
            owner[j] = i
            if reroute(displaced, old, banned=j, limit=i):
                break
            match[i] = old
            owner[old] = i
            owner[j] = displaced
        fixed_col[match[i]] = True
    return match


def solve_assignment(score: np.ndarray, tol: float = 1e-9) -> Assignment:
    """Maximum-score assignment of rows to columns of a rectangular matrix.

    Among all optimal assignments the lexicographically smallest column sequence
    is returned. Rectangular inputs are padded to square with a constant score,
    which leaves the optimum over real pairs unchanged; rows paired with padding
    columns come back as -1.
    """
    score = np.asarray(score, dtype=np.float64)
    if score.ndim != 2 or score.size == 0:
        raise EmptyMatrix("assignment needs a non-empty 2-D matrix")
    if not np.all(np.isfinite(score)):
        raise NonFiniteValue("similarity matrix has non-finite entries")
    nr, nc = score.shape
    n = max(nr, nc)
    pad = score.min() - 1.0
    sq = np.full((n, n), pad)
    sq[:nr, :nc] = score
    cost = -sq
    cols, u, v = _solve_min_cost(cost)
    reduced = cost - u[:, None] - v[None, :]
    scale = max(1.0, float(np.abs(sq).max()))
    thresh = tol * scale
    tight = [np.flatnonzero(reduced[i] <= thresh).tolist() for i in range(n)]
    for i in range(n):
        if cols[i] not in tight[i]:
            tight[i] = sorted(tight[i] + [int(cols[i])])
    cols = _lexicographic_min(tight, cols)
    out = cols[:nr].copy()
    out[out >= nc] = -1
    value = math.fsum(score[i, out[i]] for i in range(nr) if out[i] >= 0)
    return Assignment(cols=out, value=value)


def hungarian_match(sim: np.ndarray, source_units=None, target_units=None,
                    source_id: str = "", target_id: str = "") -> Matching:
    """Optimal one-to-one matching maximising total cosine similarity.

    ``source_units``/``target_units`` map matrix rows/columns back to unit
    indices (default: positions). Units left over on the longer side are unmatched.
    """
    sim = np.asarray(sim, dtype=np.float64)
    if sim.ndim != 2 or sim.size == 0:
        raise EmptyMatrix("cannot match an empty similarity matrix")
    src = np.arange(sim.shape[0]) if source_units is None else np.asarray(source_units)
    tgt = np.arange(sim.shape[1]) if target_units is None else np.asarray(target_units)
    res = solve_assignment(sim)
    perm = {int(src[i]): int(tgt[j]) for i, j in enumerate(res.cols) if j >= 0}
    return Matching(source_id=source_id, target_id=target_id, perm=perm, total_similarity=res.value)


def match_traces(a: NormalizedTrace, b: NormalizedTrace) -> Matching:
    sim = cross_similarity(a, b)
    if sim.size == 0:
        return Matching(a.checkpoint_id, b.checkpoint_id, {}, 0.0)
    return hungarian_match(sim, a.alive, b.alive, a.checkpoint_id, b.checkpoint_id)


def build_families(traces: Sequence[NormalizedTrace], matchings: Sequence[Matching] | None = None) -> FamilySet:
    """Thread consecutive matchings through a chain of checkpoints.

    Every alive unit of the first checkpoint starts a family. A family that
    cannot be continued (its unit is unmatched or dead next door) gets ``None``
    from then on; alive units that nobody reaches start new, incomplete families.
    """
    if len(traces) < 2:
        raise ChainTooShort("need at least two checkpoints to build families")
    if matchings is None:
        matchings = [match_traces(a, b) for a, b in zip(traces[:-1], traces[1:])]
    C = len(traces)
    families: list[list[int | None]] = [[int(u)] + [None] * (C - 1) for u in traces[0].alive]
    head = {int(u): k for k, u in enumerate(traces[0].alive)}  # unit at current ckpt -> family
    for c, m in enumerate(matchings, start=1):
        nxt = {}
        for unit, fam in head.items():
            tgt = m.perm.get(unit)
            if tgt is not None:
                families[fam][c] = tgt
                nxt[tgt] = fam
        for u in traces[c].alive.tolist():
            if u not in nxt:
                families.append([None] * c + [u] + [None] * (C - 1 - c))
                nxt[u] = len(families) - 1
        head = nxt
    return FamilySet(chain=[t.checkpoint_id for t in traces], families=families, matchings=list(matchings))
