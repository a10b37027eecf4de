"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines, or
``python tests/test_acceptance.py`` for a plain report.
"""

import json
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from selfcore.chain import analyze_chain
from selfcore.cli import main as cli_main
from selfcore.coactivation import (
    DEFAULT_TAU_GRID,
    bandwidth,
    coactivation_matrix,
    connected_components,
    rcm_order,
    threshold_graph,
)
from selfcore.curriculum import PhaseState, phase_controller_step, phase_outcome, plateau_step, CurriculumState
from selfcore.matching import hungarian_match
from selfcore.stats import summarize_deltas, summarize_moments
from selfcore.synthetic import (
    PlantedSpec,
    brute_force_assignment,
    brute_force_components,
    planted_traces,
    realized_levels,
)
from selfcore.traces import ActivationTrace, zscore_normalize

from graph_helpers import random_connected_graph, random_graph
from plateau_cases import CASES, CFG
import test_curriculum as rewards


def report(num, title, ok, detail, elapsed):
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {num:2d}: {title} ({detail}; {elapsed:.2f}s)")
    return ok


def timed(fn):
    t0 = time.perf_counter()
    ok, detail = fn()
    return ok, detail, time.perf_counter() - t0


# 1 -------------------------------------------------------------------------

def check_statistics_replay():
    # summarize_deltas on a sample with exactly these moments must agree with the closed form
    n, mean, s = 916, 16.921, 3.093
    base = np.linspace(-1, 1, n)
    base = (base - base.mean()) / base.std(ddof=1)
    st = summarize_deltas(mean + s * base)
    closed = summarize_moments(n, mean, s)
    targets = [
        ("se", st.se, 0.1022, 1e-4), ("z", st.z, 165.57, 0.01), ("lb99", st.lb99, 16.683, 1e-3),
        ("z_15", st.z_b, 18.80, 0.01), ("log10_p", st.log10_p, -5955.64, 0.5), ("log10_p_15", st.log10_p_b, -78.40, 0.05),
    ]
    bad = [f"{k}={v:.6g}" for k, v, want, tol in targets if abs(v - want) > tol]
    if abs(closed.z - st.z) > 1e-6 or abs(closed.lb99 - st.lb99) > 1e-9:
        bad.append("sample summary disagrees with closed form")
    return not bad, ", ".join(bad) or f"z={st.z:.4f} log10_p={st.log10_p:.2f}"


# 2 -------------------------------------------------------------------------

RECOVERY_TAUS = (0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85)


def check_planted_recovery():
    misses = []
    for seed in range(20):
        chain = planted_traces(PlantedSpec(seed=seed, chain_length=1))
        lo, hi = realized_levels(chain)
        if lo < 0.92 or hi > 0.13:
            misses.append(f"seed {seed} levels {lo:.3f}/{hi:.3f}")
        truth = chain.partition(0)
        sim = coactivation_matrix(chain.traces[0])
        for tau in RECOVERY_TAUS:
            if connected_components(threshold_graph(sim, tau)).groups != truth:
                misses.append(f"seed {seed} tau {tau}")
    return not misses, "; ".join(misses[:3]) or f"20 seeds x {len(RECOVERY_TAUS)} thresholds exact"


# 3 -------------------------------------------------------------------------

def check_hungarian():
    rng = np.random.default_rng(2024)
    bad = 0
    for _ in range(100):
        sim = rng.uniform(-1, 1, (7, 7))
        if hungarian_match(sim).total_similarity != brute_force_assignment(sim)[1]:
            bad += 1
    return bad == 0, f"{100 - bad}/100 exact"


# 4 -------------------------------------------------------------------------

def check_components():
    rng = np.random.default_rng(77)
    bad = 0
    for _ in range(100):
        n = int(rng.integers(1, 51))
        g = random_graph(rng, n, rng.uniform(0.0, 3.0 / n))
        a = {frozenset(x) for x in connected_components(g).groups}
        b = {frozenset(x) for x in brute_force_components(g)}
        bad += a != b
    return bad == 0, f"{100 - bad}/100 equal"


# 5 -------------------------------------------------------------------------

def unstructured_trace(rng):
    H, T, r = 60, 300, int(rng.integers(2, 6))
    x = rng.standard_normal((H, r)) @ rng.standard_normal((r, T)) + rng.uniform(0.1, 1.0) * rng.standard_normal((H, T))
    return zscore_normalize(ActivationTrace("u", "u", 0, "walk", 0, x))


def largest_sizes(trace):
    sim = coactivation_matrix(trace)
    return [connected_components(threshold_graph(sim, t)).sizes[0] for t in DEFAULT_TAU_GRID]


def check_monotone():
    rng = np.random.default_rng(5)
    instances = [planted_traces(PlantedSpec(seed=100 + s, chain_length=1)).traces[0] for s in range(20)]
    instances += [unstructured_trace(rng) for _ in range(20)]
    bad = 0
    for tr in instances:
        sizes = largest_sizes(tr)
        bad += any(a < b for a, b in zip(sizes, sizes[1:]))
    return bad == 0, f"{40 - bad}/40 non-increasing"


# 6 -------------------------------------------------------------------------

PLASTIC_SPEC = dict(plastic_noise=1.0, chain_length=3)  # defaults: sizes 80/40/30, within 0.95, cross 0.10, module 0 stable


def check_persistence():
    problems = []
    for seed in range(3):
        tr = planted_traces(PlantedSpec(seed=seed, chain_length=1)).traces[0]
        res = analyze_chain([tr, tr, tr], 0.70)
        worst = max(abs(r.persistence - 1.0) for r in res.records)
        if worst > 1e-6 or res.stats.separation != 0.0:
            problems.append(f"identical seed {seed}: dev {worst:.2e} sep {res.stats.separation!r}")
    seps = []
    for seed in range(5):
        res = analyze_chain(planted_traces(PlantedSpec(seed=seed, **PLASTIC_SPEC)).traces, 0.70)
        seps.append(res.stats.separation)
        if res.stats.separation is None or res.stats.separation < 15.0:
            problems.append(f"planted seed {seed}: sep {res.stats.separation}")
    return not problems, "; ".join(problems) or f"identical exact; planted separation min {min(seps):.1f} pp"


# 7 -------------------------------------------------------------------------

def check_rcm():
    rng = np.random.default_rng(31)
    bad = 0
    for _ in range(100):
        n = int(rng.integers(2, 31))
        g = random_connected_graph(rng, n, rng.uniform(0.0, 0.2))
        bad += bandwidth(g, rcm_order(g, range(n))) > bandwidth(g, range(n))
    from selfcore.coactivation import StrengthGraph

    path = StrengthGraph.from_edges(8, [(0, 5), (5, 2), (2, 7), (7, 1), (1, 6), (6, 3), (3, 4)])
    pb = bandwidth(path, rcm_order(path, range(8)))
    return bad == 0 and pb == 1, f"{100 - bad}/100 not worse, path bandwidth {pb}"


# 8 -------------------------------------------------------------------------

def check_plateau():
    bad = []
    for name, (batches, expected, outcome) in CASES.items():
        state, got = PhaseState(), []
        for rets, steps in batches:
            state, d = plateau_step(state, rets, steps, CFG)
            got.append(d)
        if got != expected or (outcome is not None and phase_outcome(state, CFG) != outcome):
            bad.append(name)
    # two failed attempts then success, and a third failure aborting
    s = CurriculumState(behavior="wiggle")
    for ev in ("failed_budget", "failed_budget", "converged"):
        s = phase_controller_step(s, ev)
    if (s.behavior, s.aborted, s.retries_used) != ("bob", False, 0):
        bad.append("two_retry")
    s = CurriculumState()
    for _ in range(3):
        s = phase_controller_step(s, "failed_budget")
    if not s.aborted:
        bad.append("abort")
    n = len(CASES) + 2
    return not bad, ", ".join(bad) or f"{n}/{n} scripted traces reproduced"


# 9 -------------------------------------------------------------------------

def check_rewards():
    try:
        rewards.test_wiggle_term_isolation()
        rewards.test_bob_term_isolation()
        rewards.test_rewards_match_duplicate_evaluation()
    except AssertionError as e:
        return False, f"mismatch: {e}"
    return True, "1000 random inputs within 1e-12, isolation exact"


# 10 ------------------------------------------------------------------------

def check_determinism(tmp):
    spec = tmp / "spec.json"
    spec.write_text(json.dumps([{"run_id": "d0", "seed": 4, "chain_length": 4, "first_cycle": 16},
                                {"run_id": "d1", "seed": 5, "chain_length": 4, "first_cycle": 16}]))
    cli_main(["synth", "--spec", str(spec), "--out", str(tmp / "data")])
    reports = []
    for _ in range(2):
        cli_main(["analyze", "--config", str(tmp / "data" / "config.json")])
        rep = json.loads((tmp / "data" / "analysis" / "report.json").read_text())
        rep.pop("generated_at", None)
        reports.append(rep)
    same = reports[0] == reports[1]
    return same and not reports[0]["errors"], "reports identical" if same else "reports differ"


CRITERIA = [
    (1, "closed-form statistics replay", check_statistics_replay, 1.0),
    (2, "planted partition recovery", check_planted_recovery, 30.0),
    (3, "assignment optimality vs enumeration", check_hungarian, 10.0),
    (4, "components vs closure oracle", check_components, None),
    (5, "largest group non-increasing over threshold grid", check_monotone, None),
    (6, "persistence calibration", check_persistence, None),
    (7, "RCM bandwidth", check_rcm, None),
    (8, "plateau and retry traces", check_plateau, None),
    (9, "reward formulas", check_rewards, None),
]


@pytest.mark.parametrize("num,title,fn,limit", CRITERIA, ids=[f"c{c[0]}" for c in CRITERIA])
def test_criterion(num, title, fn, limit, capsys):
    ok, detail, elapsed = timed(fn)
    if limit is not None and elapsed >= limit:
        ok, detail = False, f"{detail}; over {limit:.0f}s budget"
    with capsys.disabled():
        assert report(num, title, ok, detail, elapsed), detail


def test_criterion_10(tmp_path, capsys):
    ok, detail, elapsed = timed(lambda: check_determinism(tmp_path))
    with capsys.disabled():
        assert report(10, "analyze is deterministic", ok, detail, elapsed), detail


if __name__ == "__main__":
    import tempfile

    results = []
    for num, title, fn, limit in CRITERIA:
        ok, detail, elapsed = timed(fn)
        if limit is not None and elapsed >= limit:
            ok, detail = False, f"{detail}; over {limit:.0f}s budget"
        results.append(report(num, title, ok, detail, elapsed))
    with tempfile.TemporaryDirectory() as d:
        import contextlib, io

        with contextlib.redirect_stdout(io.StringIO()):
            out = timed(lambda: check_determinism(Path(d)))
        results.append(report(10, "analyze is deterministic", *out))
    sys.exit(0 if all(results) else 1)
