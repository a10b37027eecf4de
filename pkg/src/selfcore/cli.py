"""Command line entry point: ``selfcore <subcommand>`` or ``python -m selfcore``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .coactivation import DEFAULT_TAU
from .curriculum import CONTINUE, PhaseState, PlateauConfig, plateau_step
from .errors import SelfcoreError
from .fileio import read_trace, write_matrix, write_trace
from .pipeline import AnalysisConfig, dumps, export_alluvial, run_pipeline, run_sweep, shared_overlay, write_sweep_csv
from .chain import analyze_chain
from .pipeline import load_chain
from .synthetic import PlantedSpec, planted_traces
from .traces import zscore_normalize


def _grid(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def cmd_analyze(args) -> int:
    cfg = AnalysisConfig.load(args.config)
    if args.out:
        cfg.output_dir = str(Path(args.out).resolve())
    report = run_pipeline(cfg)
    out = cfg.resolve(cfg.output_dir) / "report.json"
    print(out)
    return 1 if report.errors and not report.chains else 0


def cmd_sweep(args) -> int:
    cfg = AnalysisConfig.load(args.config)
    grid = _grid(args.grid) if args.grid else (cfg.sweep_grid or None)
    if grid is None:
        from .coactivation import DEFAULT_TAU_GRID

        grid = list(DEFAULT_TAU_GRID)
    errors: list = []
    rows = run_sweep(cfg, errors=errors, grid=grid)
    out = Path(args.out) if args.out else cfg.resolve(cfg.output_dir) / "sweep.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(rows, out)
    for e in errors:
        print(f"error: {e}", file=sys.stderr)
    print(out)
    return 0


def cmd_synth(args) -> int:
    doc = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    specs = doc if isinstance(doc, list) else [doc]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    truth, chains = [], []
    for d in specs:
        chain = planted_traces(PlantedSpec.from_dict(d))
        paths = []
        for t in chain.raw:
            name = f"{t.checkpoint_id}.actv"
            write_trace(t, out / name)
            paths.append(name)
        truth.append(chain.ground_truth())
        chains.append({"run": chain.spec.run_id, "layer": chain.spec.layer, "checkpoints": paths})
    (out / "ground_truth.json").write_text(dumps(truth), encoding="utf-8")
    (out / "config.json").write_text(dumps({"chains": chains, "output_dir": "analysis"}), encoding="utf-8")
    print(out / "config.json")
    return 0


def read_returns_csv(path):
    """Rows of (step, episode_return); ``step`` is the aggregated env-step count at episode end."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]
    return [(int(float(r[0])), float(r[1])) for r in rows if r]


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def plateau_trace(rows, cfg: PlateauConfig) -> list[dict]:
    """Feed episodes grouped by step value; one trace entry per evaluation, stopping at the first stop."""
    state = PhaseState()
    trace = []
    last_step = 0
    i = 0
    while i < len(rows):
        step = rows[i][0]
        batch = []
        while i < len(rows) and rows[i][0] == step:
            batch.append(rows[i][1])
            i += 1
        state, decision = plateau_step(state, batch, step - last_step, cfg)
        last_step = step
        means = state.window_means()
        trace.append({
            "step": step,
            "episodes": state.n_episodes,
            "decision": decision,
            "mu_prev": means[0] if means else None,
            "mu_recent": means[1] if means else None,
        })
        if decision != CONTINUE:
            break
    return trace


def cmd_plateau(args) -> int:
    cfg = PlateauConfig(
        min_steps=args.plateau_min_steps,
        max_steps_phase=args.max_steps_phase,
        episode_window=args.plateau_episode_window,
        min_return=args.plateau_min_return,
        rel_change=args.plateau_rel_change,
        std_coeff=args.plateau_std_coeff,
    )
    trace = plateau_trace(read_returns_csv(args.returns), cfg)
    text = dumps({"config": vars(cfg), "trace": trace})
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_alluvial(args) -> int:
    cfg = AnalysisConfig.load(args.config)
    flows = []
    for spec in cfg.chains:
        res = analyze_chain(load_chain(cfg, spec), cfg.tau, cfg.membership_index())
        for f in export_alluvial(res.families, res.partitions, res.records):
            flows.append({"run": spec.run, "layer": spec.layer, **f})
    text = dumps(flows)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_blend(args) -> int:
    traces = [zscore_normalize(read_trace(p)) for p in args.traces]
    blended, ordering, ids = shared_overlay(traces, args.tau, args.cutoff)
    if blended is None:
        print(f"no checkpoint has cycle > {args.cutoff}", file=sys.stderr)
        return 1
    out = Path(args.out)
    write_matrix(blended, out, name="overlay")
    meta = {"perm": ordering.perm, "boundaries": ordering.block_boundaries, "matrix_path": out.name, "checkpoints": ids}
    out.with_suffix(".json").write_text(dumps(meta), encoding="utf-8")
    print(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="selfcore", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="run the full analysis described by a config file")
    a.add_argument("--config", required=True)
    a.add_argument("--out", help="override output_dir")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("sweep", help="threshold sensitivity sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--grid", help="comma-separated thresholds (default: 0.50,...,0.95,0.99,1.00)")
    s.add_argument("--out", help="CSV path (default: <output_dir>/sweep.csv)")
    s.set_defaults(func=cmd_sweep)

    y = sub.add_parser("synth", help="write planted .actv chains and ground truth")
    y.add_argument("--spec", required=True, help="JSON object (or list) of generator settings")
    y.add_argument("--out", required=True)
    y.set_defaults(func=cmd_synth)

    d = PlateauConfig()
    q = sub.add_parser("plateau-sim", help="replay episode returns through the plateau rule")
    q.add_argument("--returns", required=True, help="CSV with columns step,episode_return")
    q.add_argument("--plateau_min_steps", type=int, default=d.min_steps)
    q.add_argument("--plateau_episode_window", type=int, default=d.episode_window)
    q.add_argument("--plateau_min_return", type=float, default=d.min_return)
    q.add_argument("--plateau_rel_change", type=float, default=d.rel_change)
    q.add_argument("--plateau_std_coeff", type=float, default=d.std_coeff)
    q.add_argument("--max_steps_phase", type=int, default=d.max_steps_phase)
    q.add_argument("--out")
    q.set_defaults(func=cmd_plateau)

    f = sub.add_parser("export-alluvial", help="family flows between subnetworks as JSON")
    f.add_argument("--config", required=True)
    f.add_argument("--out")
    f.set_defaults(func=cmd_alluvial)

    b = sub.add_parser("blend", help="overlay of reordered |R| across late checkpoints")
    b.add_argument("traces", nargs="+")
    b.add_argument("--out", required=True)
    b.add_argument("--tau", type=float, default=DEFAULT_TAU)
    b.add_argument("--cutoff", type=int, default=15)
    b.set_defaults(func=cmd_blend)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SelfcoreError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
