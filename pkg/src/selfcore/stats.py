"""Transition-level separation statistics and threshold sensitivity sweeps.

For a source -> target switch, each matched neuron pair gets a persistence-like
similarity ``p_i`` and a percent change ``c_i = 100 (1 - p_i)``. Averaging
``c_i`` over the target's self group and over its pooled remainder gives
``C_self`` and ``C_task``; their difference is the transition's separation.
Separations from many transitions are then tested one-sided against 0 and
against a benchmark with a large-sample z statistic.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np

from .chain import prepare_chain, partition_chain
from .coactivation import DEFAULT_TAU_GRID, SubnetworkPartition, cosine, cosine_matrix
from .errors import NoSelfMembers, NoTaskMembers, TauOutOfRange, TooFewSamples
from .matching import Matching, match_traces
from .traces import NormalizedTrace

Z_99 = 2.326
_LN10 = math.log(10.0)
_SWITCH = 8.0
QUANTILES = (0.10, 0.25, 0.50, 0.75, 0.90)


@dataclass
class TransitionDelta:
    source_id: str
    target_id: str
    layer: int
    C_self: float
    C_task: float
    delta: float
    n_self: int
    n_task: int
    source_cycle: int = 0
    target_cycle: int = 0

    def to_dict(self):
        return asdict(self)


@dataclass
class StatSummary:
    n: int
    mean: float
    s: float
    se: float
    z: float | None
    log10_p: float | None
    lb99: float
    benchmark: float
    z_b: float | None
    log10_p_b: float | None
    degenerate: bool = False

    def to_dict(self) -> dict:
        keys = ("n", "mean", "s", "se", "z", "log10_p", "lb99", "benchmark", "z_b", "log10_p_b", "degenerate")
        return {k: getattr(self, k) for k in keys}


@dataclass
class SweepRow:
    tau: float
    layer: int
    self_size: float
    task_size: float
    sep_mean: float
    q10: float
    q25: float
    q50: float
    q75: float
    q90: float
    n_runs: int

    CSV_COLUMNS = ("tau", "layer", "self_size", "task_size", "sep_mean", "q10", "q25", "q50", "q75", "q90")

    def csv_row(self):
        return [getattr(self, c) for c in self.CSV_COLUMNS]


def log10_normal_tail(z: float) -> float:
    """``log10 P(Z >= z)`` for a standard normal ``Z``.

    Uses ``erfc`` up to z = 8 and the asymptotic Mills-ratio series beyond,
    which stays accurate where the tail probability underflows a double.
    """
    z = float(z)
    if not math.isfinite(z):
        raise ValueError("z must be finite")
    if z <= _SWITCH:
        return math.log10(0.5 * math.erfc(z / math.sqrt(2.0)))
    # P(Z >= z) = phi(z)/z * (1 - 1/z^2 + 3/z^4 - 15/z^6 + ...)
    inv2 = 1.0 / (z * z)
    series, term, k = 1.0, 1.0, 1
    while True:
        nxt = -term * (2 * k - 1) * inv2
        if abs(nxt) >= abs(term) or abs(nxt) < 1e-17:
            break
        series += nxt
        term = nxt
        k += 1
    return -z * z / (2.0 * _LN10) - math.log10(z * math.sqrt(2.0 * math.pi)) + math.log10(series)


def summarize_moments(n: int, mean: float, s: float, benchmark: float = 15.0) -> StatSummary:
    """One-sided z tests from summary moments (``s`` is the n-1 sample std)."""
    if n < 2:
        raise TooFewSamples(f"need n >= 2, got {n}")
    se = s / math.sqrt(n)
    lb = mean - Z_99 * se
    if se == 0.0:
        return StatSummary(n, mean, s, se, None, None, lb, benchmark, None, None, degenerate=True)
    z = mean / se
    zb = (mean - benchmark) / se
    return StatSummary(n, mean, s, se, z, log10_normal_tail(z), lb, benchmark, zb, log10_normal_tail(zb))


def summarize_deltas(deltas: Sequence[float], benchmark: float = 15.0) -> StatSummary:
    """Summary over per-transition separations, each transition weighted equally."""
    xs = [float(d) for d in deltas]
    n = len(xs)
    if n < 2:
        raise TooFewSamples(f"need at least 2 transitions, got {n}")
    mean = math.fsum(xs) / n
    s = math.sqrt(math.fsum((x - mean) ** 2 for x in xs) / (n - 1))
    return summarize_moments(n, mean, s, benchmark)


def pair_persistence(source: NormalizedTrace, target: NormalizedTrace, matching: Matching):
    """Per matched pair (sorted by source unit): ``(src, tgt, p_i)``."""
    pairs = sorted(matching.perm.items())
    src = np.array([i for i, _ in pairs], dtype=int)
    tgt = np.array([j for _, j in pairs], dtype=int)
    rs = cosine_matrix(source.values[src])
    rt = cosine_matrix(target.values[tgt])
    out = []
    for k, (i, j) in enumerate(pairs):
        act = cosine(source.values[i], target.values[j])
        conn = cosine(rs[k], rt[k])
        out.append((i, j, (act + conn) / 2.0))
    return out


def transition_delta(
    source: NormalizedTrace,
    target: NormalizedTrace,
    target_partition: SubnetworkPartition,
    matching: Matching | None = None,
) -> TransitionDelta:
    """Separation for one switch, grouped by the target checkpoint's subnetworks."""
    if matching is None:
        matching = match_traces(source, target)
    if len(matching.perm) < 2:
        raise NoSelfMembers("fewer than two matched units")
    self_units = set(target_partition.self_group)
    task_units = {u for g in target_partition.groups[1:] for u in g}
    c_self, c_task = [], []
    for _, j, p in pair_persistence(source, target, matching):
        c = 100.0 * (1.0 - p)
        if j in self_units:
            c_self.append(c)
        elif j in task_units:
            c_task.append(c)
    if not c_self:
        raise NoSelfMembers(f"no matched unit lies in the self group of {target.checkpoint_id!r}")
    if not c_task:
        raise NoTaskMembers(f"no matched unit lies in the task pool of {target.checkpoint_id!r}")
    C_self = math.fsum(c_self) / len(c_self)
    C_task = math.fsum(c_task) / len(c_task)
    return TransitionDelta(
        source_id=source.checkpoint_id,
        target_id=target.checkpoint_id,
        layer=target.base.layer,
        C_self=C_self,
        C_task=C_task,
        delta=C_task - C_self,
        n_self=len(c_self),
        n_task=len(c_task),
        source_cycle=source.base.cycle,
        target_cycle=target.base.cycle,
    )


def after_cycle(cutoff: int):
    """Inclusion predicate: keep transitions whose source cycle exceeds ``cutoff``."""
    return lambda d: d.source_cycle > cutoff


def tau_sweep(
    runs: Mapping[str, Sequence[Sequence[NormalizedTrace]]],
    grid: Sequence[float] = DEFAULT_TAU_GRID,
    *,
    layer: int = 0,
    membership: int = -1,
) -> list[SweepRow]:
    """Re-partition every chain at each threshold and summarise across runs.

    ``runs`` maps a run id to its chains (each an ordered list of traces of one
    layer). Per run, sizes and separation are averaged over chains; quantiles
    are taken over the per-run separation means.
    """
    for tau in grid:
        if not (0.0 < tau <= 1.0):
            raise TauOutOfRange(f"grid value {tau} outside (0, 1]")
    prepared = {rid: [prepare_chain(ch) for ch in chains] for rid, chains in runs.items()}
    rows = []
    for tau in grid:
        self_sizes, task_sizes, seps = [], [], []
        for rid in sorted(prepared):
            stats = [partition_chain(p, tau, membership).stats for p in prepared[rid]]
            self_sizes.append(np.mean([s.self_size for s in stats]))
            task_sizes.append(np.mean([s.task_size or 0 for s in stats]))
            run_seps = [s.separation for s in stats if s.separation is not None]
            seps.append(float(np.mean(run_seps)) if run_seps else float("nan"))
        seps_arr = np.asarray(seps)
        valid = seps_arr[np.isfinite(seps_arr)]
        qs = np.quantile(valid, QUANTILES) if valid.size else [float("nan")] * len(QUANTILES)
        rows.append(
            SweepRow(
                tau=float(tau),
                layer=layer,
                self_size=float(np.mean(self_sizes)),
                task_size=float(np.mean(task_sizes)),
                sep_mean=float(valid.mean()) if valid.size else float("nan"),
                q10=float(qs[0]), q25=float(qs[1]), q50=float(qs[2]), q75=float(qs[3]), q90=float(qs[4]),
                n_runs=len(prepared),
            )
        )
    return rows
