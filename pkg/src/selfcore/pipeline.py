"""End-to-end analysis driven by a JSON config.

Config keys (unknown keys are rejected)::

    {
      "chains": [{"run": "r0", "layer": 1, "checkpoints": ["a.actv", "b.actv", "c.actv"]}],
      "tau": 0.70,
      "dead_std_threshold": 1e-6,
      "membership": "last",          # "first", "last" or a chain position
      "benchmark": 15.0,
      "sweep_grid": null,            # list of thresholds, or null to skip
      "stabilization_cutoff": 15,
      "overlay": true,
      "output_dir": "out",
      "seed": 0
    }

Relative paths are resolved against the config file's directory.
"""

from __future__ import annotations

import csv
import datetime as _dt
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .chain import ChainResult, analyze_chain
from .coactivation import (
    DEFAULT_TAU,
    NeuronOrdering,
    SubnetworkPartition,
    block_layout,
    coactivation_matrix,
    connected_components,
    reorder,
    threshold_graph,
)
from .errors import ConfigError, DimensionMismatch, SelfcoreError
from .fileio import read_trace, write_matrix
from .matching import FamilySet
from .persistence import PersistenceRecord, unit_persistence
from .stats import SweepRow, TransitionDelta, summarize_deltas, tau_sweep, transition_delta
from .traces import DEFAULT_DEAD_STD, NormalizedTrace, zscore_normalize

SCHEMA_VERSION = 1


@dataclass
class ChainSpec:
    run: str
    layer: int
    checkpoints: list[str]


@dataclass
class AnalysisConfig:
    chains: list[ChainSpec]
    tau: float = DEFAULT_TAU
    dead_std_threshold: float = DEFAULT_DEAD_STD
    membership: str | int = "last"
    benchmark: float = 15.0
    sweep_grid: list[float] | None = None
    stabilization_cutoff: int = 15
    overlay: bool = True
    output_dir: str = "out"
    seed: int = 0
    base_dir: Path = field(default=Path("."), repr=False)

    @classmethod
    def from_dict(cls, doc: dict, base_dir=".") -> "AnalysisConfig":
        allowed = {f.name for f in fields(cls)} - {"base_dir"}
        unknown = set(doc) - allowed
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "chains" not in doc:
            raise ConfigError("config needs a 'chains' list")
        chains = []
        for k, ch in enumerate(doc["chains"]):
            extra = set(ch) - {"run", "layer", "checkpoints"}
            if extra:
                raise ConfigError(f"chain {k}: unknown keys {sorted(extra)}")
            try:
                chains.append(ChainSpec(run=str(ch["run"]), layer=int(ch["layer"]), checkpoints=list(ch["checkpoints"])))
            except KeyError as e:
                raise ConfigError(f"chain {k}: missing key {e}") from None
        cfg = cls(chains=chains, **{k: v for k, v in doc.items() if k != "chains"}, base_dir=Path(base_dir))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "AnalysisConfig":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")), base_dir=path.parent)

    def validate(self):
        if not (0.0 < self.tau <= 1.0):
            raise ConfigError(f"tau {self.tau} outside (0, 1]")
        if self.sweep_grid is not None and not all(0.0 < t <= 1.0 for t in self.sweep_grid):
            raise ConfigError("sweep grid values must lie in (0, 1]")
        if self.dead_std_threshold <= 0:
            raise ConfigError("dead_std_threshold must be positive")
        if not (self.membership in ("first", "last") or isinstance(self.membership, int)):
            raise ConfigError("membership must be 'first', 'last' or an integer position")

    def membership_index(self) -> int:
        return {"first": 0, "last": -1}.get(self.membership, self.membership)

    def resolve(self, p: str) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def to_dict(self) -> dict:
        return {
            "chains": [{"run": c.run, "layer": c.layer, "checkpoints": list(c.checkpoints)} for c in self.chains],
            "tau": self.tau,
            "dead_std_threshold": self.dead_std_threshold,
            "membership": self.membership,
            "benchmark": self.benchmark,
            "sweep_grid": self.sweep_grid,
            "stabilization_cutoff": self.stabilization_cutoff,
            "overlay": self.overlay,
            "output_dir": self.output_dir,
            "seed": self.seed,
        }


@dataclass
class AnalysisReport:
    config: dict
    chains: list[dict]
    transitions: list[dict]
    summary: dict | None
    summary_by_layer: dict[str, dict | None]
    sweep: list[dict]
    overlays: list[dict]
    errors: list[dict]
    generated_at: str = ""

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "tool_version": __version__,
            "generated_at": self.generated_at,
            "config": self.config,
            "chains": self.chains,
            "transitions": self.transitions,
            "summary": self.summary,
            "summary_by_layer": self.summary_by_layer,
            "sweep": self.sweep,
            "overlays": self.overlays,
            "errors": self.errors,
        }

    def to_json(self, *, include_timestamp: bool = True) -> str:
        d = self.to_dict()
        if not include_timestamp:
            d.pop("generated_at")
        return dumps(d)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    """JSON with sorted keys; NaN/inf become null."""
    return json.dumps(_clean(obj), sort_keys=True, indent=1, ensure_ascii=False) + "\n"


def export_alluvial(families: FamilySet, partitions: Sequence[SubnetworkPartition],
                    records: Sequence[PersistenceRecord]) -> list[dict]:
    """Flows of complete families between subnetworks of consecutive checkpoints.

    One entry per (checkpoint pair, source group, target group) with the number
    of families and their mean persistence. Group 0 is labelled ``self``.
    """
    score = {r.family_id: r.persistence for r in records}
    labels = [{u: g for g, units in enumerate(p.groups) for u in units} for p in partitions]
    flows = []
    for c in range(len(families.chain) - 1):
        bucket: dict[tuple[int, int], list[float]] = defaultdict(list)
        for fid in families.complete:
            f = families.families[fid]
            sg, tg = labels[c].get(f[c]), labels[c + 1].get(f[c + 1])
            if sg is None or tg is None or fid not in score:
                continue
            bucket[(sg, tg)].append(score[fid])
        for (sg, tg), vals in sorted(bucket.items()):
            flows.append({
                "source": families.chain[c],
                "target": families.chain[c + 1],
                "source_group": sg,
                "target_group": tg,
                "source_label": "self" if sg == 0 else "task",
                "target_label": "self" if tg == 0 else "task",
                "count": len(vals),
                "mean_persistence": math.fsum(vals) / len(vals),
            })
    return flows


def overlay_blend(matrices: Sequence[np.ndarray], ordering: NeuronOrdering | None = None) -> np.ndarray:
    """Element-wise mean of matrices already placed in one shared neuron ordering."""
    if not matrices:
        raise DimensionMismatch("nothing to blend")
    mats = [np.asarray(m, dtype=np.float64) for m in matrices]
    shape = mats[0].shape
    if any(m.shape != shape for m in mats):
        raise DimensionMismatch(f"matrix shapes differ: {sorted({m.shape for m in mats})}")
    if ordering is not None and len(ordering.perm) != shape[0]:
        raise DimensionMismatch(f"ordering covers {len(ordering.perm)} units, matrices have {shape[0]}")
    return np.mean(np.stack(mats), axis=0)


def shared_overlay(traces: Sequence[NormalizedTrace], tau: float, cutoff: int):
    """Blend ``|R|`` of every checkpoint after ``cutoff`` in the ordering of the first such one."""
    late = [t for t in traces if t.base.cycle > cutoff]
    if not late:
        return None, None, []
    sims = [coactivation_matrix(t) for t in late]
    graph = threshold_graph(sims[0], tau)
    ordering = block_layout(connected_components(graph), graph)
    blended = overlay_blend([reorder(s.abs, ordering) for s in sims], ordering)
    return blended, ordering, [t.checkpoint_id for t in late]


def _chain_entry(spec: ChainSpec, res: ChainResult) -> dict:
    H = res.traces[-1].H
    return {
        "run": spec.run,
        "layer": spec.layer,
        "checkpoints": [
            {"id": t.checkpoint_id, "cycle": t.base.cycle, "behavior": t.base.behavior, "alive": t.n_alive, "H": t.H}
            for t in res.traces
        ],
        "tau": res.tau,
        "partitions": [p.groups for p in res.partitions],
        "orderings": [{"perm": o.perm, "boundaries": o.block_boundaries} for o in res.orderings],
        "families": res.families.to_dict(),
        "records": [vars(r) for r in res.records],
        "unit_persistence": unit_persistence(res.records, H, res.membership),
        "stats": res.stats.to_dict(),
        "alluvial": export_alluvial(res.families, res.partitions, res.records),
    }


def load_chain(cfg: AnalysisConfig, spec: ChainSpec) -> list[NormalizedTrace]:
    traces = []
    for p in spec.checkpoints:
        t = read_trace(cfg.resolve(p))
        if t.layer != spec.layer:
            raise ConfigError(f"{p}: trace layer {t.layer} but chain declares layer {spec.layer}")
        traces.append(zscore_normalize(t, cfg.dead_std_threshold))
    if len({t.T for t in traces}) != 1:
        raise DimensionMismatch(f"chain {spec.run}/L{spec.layer} mixes reference-set sizes")
    return traces


def run_pipeline(cfg: AnalysisConfig, *, write: bool = True) -> AnalysisReport:
    """normalize -> co-activation -> blocks -> families -> persistence -> aggregation -> deltas -> summary."""
    chains, transitions, errors = [], [], []
    loaded: dict[int, list[NormalizedTrace]] = {}
    included = []
    for k, spec in enumerate(cfg.chains):
        ctx = {"chain": k, "run": spec.run, "layer": spec.layer}
        try:
            traces = load_chain(cfg, spec)
            res = analyze_chain(traces, cfg.tau, cfg.membership_index())
        except (SelfcoreError, OSError) as e:
            errors.append({**ctx, "stage": "chain", "error": type(e).__name__, "message": str(e)})
            continue
        loaded[k] = traces
        chains.append(_chain_entry(spec, res))
        for c, m in enumerate(res.families.matchings):
            src, tgt = res.traces[c], res.traces[c + 1]
            try:
                d = transition_delta(src, tgt, res.partitions[c + 1], m)
            except SelfcoreError as e:
                errors.append({**ctx, "stage": "transition", "source": src.checkpoint_id,
                               "target": tgt.checkpoint_id, "error": type(e).__name__, "message": str(e)})
                continue
            keep = d.source_cycle > cfg.stabilization_cutoff
            transitions.append({**d.to_dict(), "run": spec.run, "included": keep})
            if keep:
                included.append(d)

    summary, by_layer = None, {}
    try:
        summary = summarize_deltas([d.delta for d in included], cfg.benchmark).to_dict()
    except SelfcoreError as e:
        errors.append({"stage": "summary", "error": type(e).__name__, "message": str(e)})
    for layer in sorted({d.layer for d in included}):
        ds = [d.delta for d in included if d.layer == layer]
        by_layer[str(layer)] = summarize_deltas(ds, cfg.benchmark).to_dict() if len(ds) >= 2 else None

    out_dir = cfg.resolve(cfg.output_dir)
    sweep_rows: list[SweepRow] = []
    if cfg.sweep_grid:
        sweep_rows = run_sweep(cfg, loaded, errors)

    overlays = []
    if cfg.overlay:
        for (run, layer), traces in _group_run_layer(cfg, loaded).items():
            blended, ordering, ids = shared_overlay(traces, cfg.tau, cfg.stabilization_cutoff)
            if blended is None:
                continue
            name = f"overlay_{run}_L{layer}.actv"
            if write:
                out_dir.mkdir(parents=True, exist_ok=True)
                write_matrix(blended, out_dir / name, name=f"overlay-{run}", run_id=run, layer=layer)
            overlays.append({"run": run, "layer": layer, "checkpoints": ids, "perm": ordering.perm,
                             "boundaries": ordering.block_boundaries, "matrix_path": name})

    report = AnalysisReport(
        config=cfg.to_dict(),
        chains=chains,
        transitions=transitions,
        summary=summary,
        summary_by_layer=by_layer,
        sweep=[{c: getattr(r, c) for c in SweepRow.CSV_COLUMNS} | {"n_runs": r.n_runs} for r in sweep_rows],
        overlays=overlays,
        errors=errors,
        generated_at=_dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    )
    if write:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(report.to_json(), encoding="utf-8")
        if sweep_rows:
            write_sweep_csv(sweep_rows, out_dir / "sweep.csv")
    return report


def _group_run_layer(cfg, loaded):
    grouped: dict[tuple[str, int], list[NormalizedTrace]] = {}
    for k, traces in loaded.items():
        spec = cfg.chains[k]
        bucket = grouped.setdefault((spec.run, spec.layer), [])
        seen = {t.checkpoint_id for t in bucket}
        bucket.extend(t for t in traces if t.checkpoint_id not in seen)
    for bucket in grouped.values():
        bucket.sort(key=lambda t: t.base.cycle)  # stable: keeps chain order within a cycle
    return grouped


def run_sweep(cfg: AnalysisConfig, loaded=None, errors=None, grid=None) -> list[SweepRow]:
    if loaded is None:
        loaded, errors = {}, [] if errors is None else errors
        for k, spec in enumerate(cfg.chains):
            try:
                loaded[k] = load_chain(cfg, spec)
            except (SelfcoreError, OSError) as e:
                errors.append({"chain": k, "stage": "chain", "error": type(e).__name__, "message": str(e)})
    grid = grid or cfg.sweep_grid
    rows = []
    for layer in sorted({cfg.chains[k].layer for k in loaded}):
        runs: dict[str, list] = {}
        for k, traces in loaded.items():
            if cfg.chains[k].layer == layer:
                runs.setdefault(cfg.chains[k].run, []).append(traces)
        rows.extend(tau_sweep(runs, grid, layer=layer, membership=cfg.membership_index()))
    return rows


def write_sweep_csv(rows: Sequence[SweepRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SweepRow.CSV_COLUMNS)
        for r in rows:
            w.writerow(r.csv_row())
