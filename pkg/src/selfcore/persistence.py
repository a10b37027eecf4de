"""Per-family persistence scores and their aggregation over subnetworks."""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .coactivation import SubnetworkPartition, cosine, cosine_matrix
from .errors import IncompleteFamily, TooFewFamilies
from .matching import FamilySet
from .traces import NormalizedTrace


@dataclass
class PersistenceRecord:
    family_id: int
    members: tuple[int, ...]
    act_sim: float
    conn_sim: float
    persistence: float
    percent_change: float

    @classmethod
    def from_terms(cls, family_id, members, act_sim, conn_sim):
        p = (act_sim + conn_sim) / 2.0
        return cls(family_id, tuple(int(m) for m in members), float(act_sim), float(conn_sim), p, percent_change(p))


@dataclass
class SubnetworkStats:
    layer: int | None
    cycle: int | None
    self_size: int
    task_size: int | None
    self_persistence: float | None
    task_persistence: float | None
    self_percent_change: float | None
    task_percent_change: float | None
    separation: float | None  # task minus self mean percent change, percentage points
    n_self_families: int
    n_task_families: int
    group_persistence: list[float | None] = field(default_factory=list)
    empty_task_pool: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def percent_change(persistence: float) -> float:
    return 100.0 * (1.0 - persistence)


def _mean(xs) -> float:
    xs = list(xs)
    return math.fsum(xs) / len(xs)


def activation_similarity(members: Sequence[int | None], traces: Sequence[NormalizedTrace]) -> float:
    """Mean cosine of one family's activation vectors over all checkpoint pairs."""
    if any(m is None for m in members):
        raise IncompleteFamily("family has no member at some checkpoint")
    vecs = [traces[c].values[m] for c, m in enumerate(members)]
    return _mean(cosine(a, b) for a, b in itertools.combinations(vecs, 2))


def connectivity_from_matrices(mats: Sequence[np.ndarray]) -> np.ndarray:
    """``conn_sim`` per row given one family-family matrix per checkpoint.

    Rows include the diagonal entry of each matrix.
    """
    K = mats[0].shape[0]
    pairs = list(itertools.combinations(range(len(mats)), 2))
    return np.array([_mean(cosine(mats[c][k], mats[d][k]) for c, d in pairs) for k in range(K)])


def family_matrices(families: FamilySet, traces: Sequence[NormalizedTrace]) -> list[np.ndarray]:
    members = families.complete_members()
    return [cosine_matrix(t.values[members[:, c]]) for c, t in enumerate(traces)]


def connectivity_similarity(families: FamilySet, traces: Sequence[NormalizedTrace]) -> np.ndarray:
    """Per complete family: mean over checkpoint pairs of the cosine between its
    rows in the family-family co-activation matrices."""
    if len(families.complete) < 2:
        raise TooFewFamilies(f"need at least 2 complete families, have {len(families.complete)}")
    return connectivity_from_matrices(family_matrices(families, traces))


def persistence_scores(families: FamilySet, traces: Sequence[NormalizedTrace]) -> list[PersistenceRecord]:
    """Records for every complete family; incomplete ones are skipped
    (``families.incomplete`` lists them)."""
    conn = connectivity_similarity(families, traces)
    out = []
    for k, fid in enumerate(families.complete):
        members = families.families[fid]
        act = activation_similarity(members, traces)
        out.append(PersistenceRecord.from_terms(fid, members, act, conn[k]))
    return out


def aggregate_by_subnetwork(
    records: Sequence[PersistenceRecord],
    partition: SubnetworkPartition,
    membership: int = -1,
    *,
    layer: int | None = None,
    cycle: int | None = None,
) -> SubnetworkStats:
    """Self (largest group) vs pooled task statistics.

    Each family is placed in the group holding its member at checkpoint position
    ``membership`` (default: last), and ``partition`` must come from that checkpoint.
    """
    label = {u: g for g, units in enumerate(partition.groups) for u in units}
    by_group: dict[int, list[PersistenceRecord]] = {}
    for r in records:
        g = label.get(r.members[membership])
        if g is not None:
            by_group.setdefault(g, []).append(r)

    def mean_of(rs, attr):
        return _mean(getattr(r, attr) for r in rs) if rs else None

    self_recs = by_group.get(0, [])
    task_recs = [r for g, rs in sorted(by_group.items()) if g != 0 for r in rs]
    empty = len(partition.groups) <= 1
    self_pc = mean_of(self_recs, "percent_change")
    task_pc = None if empty else mean_of(task_recs, "percent_change")
    sep = task_pc - self_pc if (self_pc is not None and task_pc is not None) else None
    return SubnetworkStats(
        layer=layer,
        cycle=cycle,
        self_size=len(partition.groups[0]) if partition.groups else 0,
        task_size=None if empty else sum(partition.sizes[1:]),
        self_persistence=mean_of(self_recs, "persistence"),
        task_persistence=None if empty else mean_of(task_recs, "persistence"),
        self_percent_change=self_pc,
        task_percent_change=task_pc,
        separation=sep,
        n_self_families=len(self_recs),
        n_task_families=len(task_recs),
        group_persistence=[mean_of(by_group.get(g, []), "persistence") for g in range(len(partition.groups))],
        empty_task_pool=empty,
    )


def unit_persistence(records: Sequence[PersistenceRecord], H: int, membership: int = -1) -> np.ndarray:
    """Persistence score per unit of the membership checkpoint (NaN where no complete family)."""
    out = np.full(H, np.nan)
    for r in records:
        out[r.members[membership]] = r.persistence
    return out
