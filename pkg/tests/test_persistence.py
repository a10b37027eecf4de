import itertools
import math

import numpy as np
import pytest

from selfcore.chain import analyze_chain
from selfcore.coactivation import SubnetworkPartition
from selfcore.errors import IncompleteFamily, TooFewFamilies
from selfcore.matching import FamilySet, build_families
from selfcore.persistence import (
    PersistenceRecord,
    activation_similarity,
    aggregate_by_subnetwork,
    connectivity_from_matrices,
    percent_change,
    persistence_scores,
    unit_persistence,
)

from conftest import norm


def test_percent_change_values():
    assert percent_change(1.0) == 0.0
    assert percent_change(0.5) == 50.0
    assert percent_change(0.0) == 100.0
    assert percent_change(-0.2) == pytest.approx(120.0)


def test_identical_chain_scores_exactly_one(rng):
    x = rng.standard_normal((12, 80))
    traces = [norm(x, cid=f"c{i}") for i in range(3)]
    recs = persistence_scores(build_families(traces), traces)
    assert len(recs) == 12
    for r in recs:
        assert abs(r.persistence - 1.0) <= 1e-6
        assert r.act_sim == pytest.approx(1.0, abs=1e-12)


def test_conn_sim_matches_explicit_loop(rng):
    K, C = 6, 3
    mats = []
    for _ in range(C):
        a = rng.uniform(-1, 1, (K, K))
        mats.append((a + a.T) / 2)
    got = connectivity_from_matrices(mats)
    for k in range(K):
        vals = []
        for c, d in itertools.combinations(range(C), 2):
            u, v = mats[c][k], mats[d][k]
            vals.append(sum(u * v) / math.sqrt(sum(u * u) * sum(v * v)))
        assert got[k] == pytest.approx(np.mean(vals), abs=1e-12)


def test_activation_similarity_two_checkpoints():
    a = norm([[1, 2, 3, 4], [4, 3, 2, 1]], cid="a")
    b = norm([[4, 3, 2, 1], [1, 2, 3, 5]], cid="b")
    assert activation_similarity([0, 1], [a, b]) == pytest.approx(np.corrcoef([1, 2, 3, 4], [1, 2, 3, 5])[0, 1])
    with pytest.raises(IncompleteFamily):
        activation_similarity([0, None], [a, b])


def test_too_few_families(rng):
    traces = [norm(rng.standard_normal((1, 10)), cid=c) for c in "ab"]
    with pytest.raises(TooFewFamilies):
        persistence_scores(build_families(traces), traces)


def test_incomplete_families_skipped(rng):
    x = rng.standard_normal((5, 40))
    y = x.copy()
    y[4] = 0.0
    traces = [norm(x, cid="a"), norm(y, cid="b")]
    fam = build_families(traces)
    recs = persistence_scores(fam, traces)
    assert len(recs) == 4 and fam.incomplete == [4]


def _rec(fid, last, p):
    return PersistenceRecord.from_terms(fid, [0, last], p, p)


def test_aggregate_hand_computed():
    part = SubnetworkPartition(groups=[[0, 1, 2], [3, 4], [5]], tau=0.7, dead=[])
    recs = [_rec(0, 0, 1.0), _rec(1, 1, 0.9), _rec(2, 3, 0.5), _rec(3, 5, 0.3)]
    s = aggregate_by_subnetwork(recs, part)
    assert s.self_size == 3 and s.task_size == 3
    assert s.self_percent_change == pytest.approx(5.0)
    assert s.task_percent_change == pytest.approx(60.0)
    assert s.separation == pytest.approx(55.0)
    assert s.group_persistence == [pytest.approx(0.95), 0.5, 0.3]


def test_single_group_has_empty_task_pool():
    part = SubnetworkPartition(groups=[[0, 1]], tau=0.7, dead=[])
    s = aggregate_by_subnetwork([_rec(0, 0, 0.8), _rec(1, 1, 0.6)], part)
    assert s.empty_task_pool and s.task_percent_change is None and s.separation is None


def test_unit_persistence_map():
    recs = [_rec(0, 2, 0.4), _rec(1, 0, 0.7)]
    out = unit_persistence(recs, 3)
    assert out[0] == 0.7 and np.isnan(out[1]) and out[2] == 0.4


def test_identical_chain_separation_exactly_zero(planted_chain):
    traces = [planted_chain.traces[0]] * 3
    res = analyze_chain(traces, 0.7)
    assert res.stats.separation == 0.0


def test_planted_separation(planted_chain):
    res = analyze_chain(planted_chain.traces, 0.7)
    assert res.stats.self_size == 80
    assert res.stats.self_persistence > 0.99
    assert res.stats.separation >= 15.0
