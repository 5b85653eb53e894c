import math

import numpy as np
import pytest

from hrcm.gregtrees import (
    GregTree,
    RED,
    brute_force_greg,
    canonical_code,
    enumerate_greg,
    greg_asymptotic,
    greg_count,
    moment_bound_check,
)
from hrcm.sampling import ConnectionSpec

# independently verified by the exhaustive oracle below before freezing
KNOWN_COUNTS = {1: 1, 2: 1, 3: 4, 4: 32, 5: 396, 6: 6692}


def test_single_vertex_tree():
    trees = enumerate_greg(1)
    assert len(trees) == 1
    assert trees[0].blue_count == 1 and trees[0].red_count == 0
    assert trees[0].edges == ()


def test_counts_match_exhaustive_oracle():
    for n in range(1, 7):
        assert greg_count(n) == len(brute_force_greg(n)) == KNOWN_COUNTS[n]


def test_canonical_sets_equal_oracle():
    for n in range(1, 6):
        gen_codes = {t.canonical_code for t in enumerate_greg(n)}
        oracle_codes = set(brute_force_greg(n).values())
        assert gen_codes == oracle_codes


def test_tree_invariants():
    for n in range(2, 7):
        for t in enumerate_greg(n):
            v = t.n_vertices
            assert len(t.edges) == v - 1
            deg = [0] * v
            for a, b in t.edges:
                deg[a] += 1
                deg[b] += 1
            for k in range(v):
                if t.colours[k] == RED:
                    assert deg[k] >= 3
                else:
                    assert deg[k] >= 1
            assert len(t.edges) <= 2 * n - 3


def test_edge_bound_attained():
    for n in range(2, 7):
        assert max(len(t.edges) for t in enumerate_greg(n)) == 2 * n - 3


def test_enumeration_cap():
    with pytest.raises(ValueError):
        enumerate_greg(9)
    with pytest.raises(ValueError):
        enumerate_greg(0)


def test_canonicalisation_quotients_red_permutations():
    gen = np.random.default_rng(3)
    for t in enumerate_greg(5):
        if t.red_count < 2:
            continue
        reds = [i for i, c in enumerate(t.colours) if c == RED]
        perm = dict(zip(reds, gen.permutation(reds)))
        relabel = {i: perm.get(i, i) for i in range(t.n_vertices)}
        adj = [[] for _ in range(t.n_vertices)]
        for a, b in t.edges:
            adj[relabel[a]].append(relabel[b])
            adj[relabel[b]].append(relabel[a])
        colours = [0] * t.n_vertices
        for i, c in enumerate(t.colours):
            colours[relabel[i]] = c
        assert canonical_code(adj, colours) == t.canonical_code


def test_canonicalisation_separates_blue_labels():
    # swapping two blue labels must not collapse distinct trees
    adj = [[1], [0, 2], [1]]
    c1 = canonical_code(adj, [1, 2, 3])
    c2 = canonical_code(adj, [2, 1, 3])
    assert c1 != c2


def test_asymptotic_ratio_trend():
    ratios = [greg_count(n) / greg_asymptotic(n) for n in (4, 5, 6)]
    assert abs(ratios[0] - 1) > abs(ratios[1] - 1) > abs(ratios[2] - 1)


def test_asymptotic_monotone_and_finite():
    vals = [greg_asymptotic(n) for n in range(2, 13)]
    assert all(vals[i] < vals[i + 1] for i in range(len(vals) - 1))
    assert 0 < greg_asymptotic(6) < math.inf


def test_moment_bound_n1_trivial():
    rep = moment_bound_check(0.05, ConnectionSpec.boolean(1.0), 1, 5.0, 400, 7)
    assert rep["constant"] == 2 * KNOWN_COUNTS[2]
    assert rep["holds"]


def test_moment_bound_n2_wide_margin():
    rep = moment_bound_check(0.05, ConnectionSpec.boolean(1.0), 2, 6.0, 2000, 11,
                             threads=2)
    assert rep["constant"] == 6 * KNOWN_COUNTS[3]
    assert rep["holds"]
    assert rep["slack"] > 0


def test_moment_bound_refuses_supercritical():
    with pytest.raises(ValueError, match="subcritical"):
        moment_bound_check(0.9, ConnectionSpec.boolean(1.0), 2, 6.0, 100, 13,
                           lambda_c_hint=0.7)
