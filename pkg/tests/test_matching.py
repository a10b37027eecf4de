import itertools
import math

import numpy as np
import pytest

from selfcore.errors import ChainTooShort, EmptyMatrix, NonFiniteValue, ReferenceSetMismatch
from selfcore.matching import build_families, cross_similarity, hungarian_match, match_traces, solve_assignment
from selfcore.synthetic import brute_force_assignment

from conftest import norm


def test_identity_dominant_matrix():
    sim = np.eye(4) * 0.9 + 0.05
    m = hungarian_match(sim)
    assert m.perm == {0: 0, 1: 1, 2: 2, 3: 3}
    assert m.total_similarity == pytest.approx(4 * 0.95)


def test_anti_diagonal():
    sim = np.fliplr(np.eye(3))
    assert hungarian_match(sim).perm == {0: 2, 1: 1, 2: 0}


def test_ties_pick_lexicographically_smallest():
    assert hungarian_match(np.ones((4, 4))).perm == {i: i for i in range(4)}
    sim = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    assert hungarian_match(sim).perm == {0: 0, 1: 1, 2: 2}


def test_matches_brute_force_on_random_7x7():
    rng = np.random.default_rng(3)
    for _ in range(100):
        sim = rng.uniform(-1, 1, (7, 7))
        perm, val = brute_force_assignment(sim)
        res = solve_assignment(sim)
        assert res.value == val
        assert res.cols.tolist() == perm


def test_ties_agree_with_enumeration_order():
    rng = np.random.default_rng(4)
    for _ in range(50):
        sim = rng.integers(0, 3, (6, 6)).astype(float)
        perm, val = brute_force_assignment(sim)
        res = solve_assignment(sim)
        assert res.value == val and res.cols.tolist() == perm


def test_rectangular_leaves_extra_units_unmatched():
    sim = np.array([[0.1, 0.9, 0.2], [0.8, 0.1, 0.3]])
    m = hungarian_match(sim)
    assert m.perm == {0: 1, 1: 0}
    tall = solve_assignment(sim.T)
    assert sorted(j for j in tall.cols if j >= 0) == [0, 1]
    assert (tall.cols == -1).sum() == 1
    best = max(sum(sim.T[i, j] for i, j in zip(rows, range(2))) for rows in itertools.permutations(range(3), 2))
    assert tall.value == pytest.approx(best)


def test_unit_index_mapping():
    m = hungarian_match(np.eye(2), source_units=[3, 7], target_units=[1, 5])
    assert m.perm == {3: 1, 7: 5}


def test_invalid_inputs():
    with pytest.raises(EmptyMatrix):
        hungarian_match(np.zeros((0, 3)))
    with pytest.raises(NonFiniteValue):
        hungarian_match(np.array([[np.nan, 1.0], [0.0, 1.0]]))


def test_recovers_planted_permutation(planted_chain):
    a, b = planted_chain.traces[0], planted_chain.traces[1]
    m = match_traces(a, b)
    pi = planted_chain.permutations[0]
    for u in planted_chain.stable_units(0):
        assert m.perm[u] == pi[u]


def test_cross_similarity_reference_mismatch():
    a = norm(np.random.default_rng(0).standard_normal((3, 10)))
    b = norm(np.random.default_rng(1).standard_normal((3, 12)))
    with pytest.raises(ReferenceSetMismatch):
        cross_similarity(a, b)


def test_families_on_permuted_copy(rng):
    x = rng.standard_normal((6, 40))
    pi = rng.permutation(6)
    y = np.empty_like(x)
    y[pi] = x
    fam = build_families([norm(x, cid="a"), norm(y, cid="b")])
    assert fam.families == [[i, int(pi[i])] for i in range(6)]
    assert fam.incomplete == []


def test_families_dead_unit_breaks_chain(rng):
    x = rng.standard_normal((4, 30))
    y = x.copy()
    y[2] = 1.0
    z = x.copy()
    fam = build_families([norm(x, cid="a"), norm(y, cid="b"), norm(z, cid="c")])
    assert [0, 0, 0] in fam.families and [2, None, None] in fam.families
    assert [None, None, 2] in fam.families
    assert len(fam.complete) == 3


def test_chain_too_short(rng):
    with pytest.raises(ChainTooShort):
        build_families([norm(rng.standard_normal((3, 5)))])


def test_families_compose_along_chain(planted_chain):
    fam = build_families(planted_chain.traces)
    comp = planted_chain.composed_permutation()
    by_first = {f[0]: f for f in fam.families if f[0] is not None}
    for u in planted_chain.stable_units(0):
        assert by_first[u][-1] == comp[u]
