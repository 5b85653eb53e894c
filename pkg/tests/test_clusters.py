import math
from collections import deque

import numpy as np
import pytest

from hrcm import rng as rngmod
from hrcm.clusters import (
    UnionFind,
    cluster_stats,
    components,
    estimate_chi,
    estimate_magnetization,
    estimate_tail,
    estimate_theta,
    sample_origin_cluster_sizes,
    two_point,
)
from hrcm.geometry import HPoint, poincare_radius
from hrcm.sampling import ConnectionSpec, int_phi, sample_configuration

BOOL1 = ConnectionSpec.boolean(1.0)
EXP2 = ConnectionSpec.exponential(2.0)


def bfs_labels(n, edges):
    adj = [[] for _ in range(n)]
    for i, j in edges:
        adj[int(i)].append(int(j))
        adj[int(j)].append(int(i))
    labels = [-1] * n
    for start in range(n):
        if labels[start] >= 0:
            continue
        labels[start] = start
        dq = deque([start])
        while dq:
            u = dq.popleft()
            for v in adj[u]:
                if labels[v] < 0:
                    labels[v] = start
                    dq.append(v)
    return np.array(labels)


def test_components_no_edges():
    lab = components(5, np.empty((0, 2), dtype=int))
    assert list(lab) == [0, 1, 2, 3, 4]


def test_components_path_graph():
    lab = components(3, np.array([[0, 1], [1, 2]]))
    assert len(set(lab)) == 1
    assert (lab == lab[0]).all()


def test_components_vs_bfs_oracle_100_configs():
    for rep in range(100):
        cfg = sample_configuration(0.8, 4.0, 2, BOOL1, seed=rngmod.derive_seed(50, rep))
        lab = components(cfg.n_points, cfg.edges)
        oracle = bfs_labels(cfg.n_points, cfg.edges)
        assert np.array_equal(lab, oracle)


def test_union_find_matches_components():
    cfg = sample_configuration(0.9, 4.5, 2, BOOL1, seed=61)
    uf = UnionFind(cfg.n_points)
    for i, j in cfg.edges:
        uf.union(int(i), int(j))
    lab = components(cfg.n_points, cfg.edges)
    for a in range(cfg.n_points):
        for b in range(a + 1, min(a + 40, cfg.n_points)):
            assert (uf.find(a) == uf.find(b)) == (lab[a] == lab[b])


def test_cluster_stats_fields():
    cfg = sample_configuration(0.6, 4.0, 2, BOOL1, seed=71, q=0.4)
    st = cluster_stats(cfg, margin=1.0)
    assert st.origin_cluster_size >= 1
    assert sum(s * c for s, c in st.size_histogram.items()) == cfg.n_points
    assert st.margin == 1.0


def test_reach_monotone_in_edge_addition():
    gen = np.random.default_rng(73)
    for rep in range(30):
        cfg = sample_configuration(1.2, 4.0, 2, BOOL1, seed=rngmod.derive_seed(80, rep))
        full = cluster_stats(cfg, margin=1.0)
        keep = gen.random(cfg.edges.shape[0]) < 0.5
        sub = sample_configuration(1.2, 4.0, 2, BOOL1, seed=rngmod.derive_seed(80, rep))
        sub.edges = cfg.edges[keep]
        subst = cluster_stats(sub, margin=1.0)
        assert (not subst.reaches_boundary) or full.reaches_boundary
        assert subst.origin_cluster_size <= full.origin_cluster_size


def test_chi_at_lambda_zero():
    est = estimate_chi(0.0, BOOL1, 5.0, 1.0, 64, 91)
    assert est.chi_hat == 1.0
    assert est.stderr == 0.0
    assert est.censored_fraction == 0.0


def test_chi_window_too_small_error():
    # margin larger than the window: even the isolated origin is censored
    with pytest.raises(ValueError, match="window too small"):
        estimate_chi(0.0, BOOL1, 2.0, 3.0, 16, 93)


def test_chi_branching_upper_bound():
    lam = 0.15
    est = estimate_chi(lam, BOOL1, 7.0, 1.0, 2000, 95, threads=2)
    bound = 1.0 / (1.0 - lam * int_phi(BOOL1, 2))
    assert est.chi_hat <= bound + 3 * est.stderr


def test_theta_lambda_zero():
    est = estimate_theta(0.0, BOOL1, [4.0, 5.0], 1.0, 64, 97)
    assert est.theta_hat == [0.0, 0.0]
    assert est.limit_estimate == 0.0


def test_theta_deep_supercritical():
    est = estimate_theta(5.0, BOOL1, [6.0, 8.0], 1.0, 150, 99, threads=2)
    assert est.theta_hat[0] > 0.9
    assert est.theta_hat[1] > 0.9


def test_chi_monotone_on_subcritical_grid():
    prev = None
    for i, lam in enumerate((0.08, 0.16, 0.24)):
        est = estimate_chi(lam, BOOL1, 6.0, 1.0, 1500,
                           rngmod.derive_seed(140, i), threads=2)
        if prev is not None:
            assert est.chi_hat >= prev.chi_hat - 3 * math.hypot(est.stderr, prev.stderr)
        prev = est


def test_theta_monotone_in_radius():
    est = estimate_theta(0.6, BOOL1, [6.0, 8.0], 1.0, 1500, 101, threads=2)
    joint = 3.0 * math.hypot(est.stderr[0], est.stderr[1])
    assert est.theta_hat[1] <= est.theta_hat[0] + joint
    assert est.monotone_decreasing


def test_tail_basics():
    est = estimate_tail(0.4, BOOL1, 6.0, [1, 2, 5, 10, 30], 1500, 103, threads=2)
    assert est.ccdf[0] == 1.0
    assert all(est.ccdf[k + 1] <= est.ccdf[k] for k in range(len(est.ccdf) - 1))
    for p, lo, hi in zip(est.ccdf, est.wilson_low, est.wilson_high):
        assert 0.0 <= lo <= hi <= 1.0
        assert lo - 1e-12 <= p <= hi + 1e-12


def test_tail_grid_validation():
    with pytest.raises(ValueError):
        estimate_tail(0.3, BOOL1, 5.0, [5, 5, 10], 64, 105)


def test_magnet_lambda_zero():
    # cluster = {o}; with the origin as ghost candidate M = q and the
    # ghost-free susceptibility is 1 - q
    est = estimate_magnetization(0.0, 0.5, BOOL1, 5.0, 4000, 107)
    se = math.sqrt(0.25 / 4000)
    assert abs(est.m_hat[0] - 0.5) < 4 * se
    assert abs(est.chi_gf_hat[0] - 0.5) < 4 * se


def test_magnet_q_one():
    est = estimate_magnetization(0.3, 1.0, BOOL1, 5.0, 256, 109)
    assert est.m_hat[0] == 1.0
    assert est.chi_gf_hat[0] == 0.0


def test_magnet_q_near_one_isolation_oracle():
    # at q ~ 1 the magnetization misses 1 only through non-ghost isolated
    # origins: M ~ 1 - (1-q) P(#C = 1), P(#C = 1) = exp(-lam int phi)
    lam, q = 0.3, 0.999
    est = estimate_magnetization(lam, q, BOOL1, 7.0, 30_000, 111, threads=2)
    p_iso = math.exp(-lam * int_phi(BOOL1, 2))
    target = 1.0 - (1.0 - q) * p_iso
    assert abs(est.m_hat[0] - target) < 3 * max(est.m_stderr[0], 1e-5) + 5e-5


def test_magnet_finite_difference_identity():
    # (1-q) dM/dq = ghost-free susceptibility, with common random numbers
    lam, q, h = 0.05, 0.3, 0.05
    est = estimate_magnetization(lam, [q - h, q, q + h], BOOL1, 6.0, 6000, 113,
                                 threads=2)
    m_lo = est.ghost_hits[:, 0].astype(float)
    m_hi = est.ghost_hits[:, 2].astype(float)
    chi_gf = est.chi_gf_values[:, 1]
    delta = (1.0 - q) * (m_hi - m_lo) / (2.0 * h) - chi_gf
    dm = delta.mean()
    dse = delta.std(ddof=1) / math.sqrt(delta.size)
    assert abs(dm) < 3 * dse


def test_magnet_q_validation():
    with pytest.raises(ValueError):
        estimate_magnetization(0.1, 1.5, BOOL1, 5.0, 64, 115)


def test_two_point_at_origin():
    est = two_point(0.3, BOOL1, HPoint(np.zeros(2)), 5.0, 64, 117)
    assert est.tau_hat == 1.0


def test_two_point_certain_edge():
    x = HPoint(np.array([poincare_radius(0.5), 0.0]))
    est = two_point(0.2, BOOL1, x, 5.0, 400, 119)
    assert est.tau_hat == 1.0


def test_two_point_outside_window():
    x = HPoint(np.array([poincare_radius(4.9), 0.0]))
    with pytest.raises(ValueError, match="margin"):
        two_point(0.2, BOOL1, x, 5.0, 64, 121)


def test_two_point_monotone_and_rotation_invariant():
    lam = 0.15
    taus = []
    for i, r in enumerate((1.2, 2.0, 2.8)):
        x = HPoint(np.array([poincare_radius(r), 0.0]))
        est = two_point(lam, BOOL1, x, 6.0, 4000, rngmod.derive_seed(123, i), threads=2)
        taus.append((est.tau_hat, est.stderr))
    for k in range(len(taus) - 1):
        assert taus[k + 1][0] <= taus[k][0] + 3 * math.hypot(taus[k][1], taus[k + 1][1])
    # rotation invariance at fixed radius
    r = 1.5
    a = two_point(lam, BOOL1, HPoint(np.array([poincare_radius(r), 0.0])),
                  6.0, 4000, 900, threads=2)
    c, s = math.cos(1.1), math.sin(1.1)
    b = two_point(lam, BOOL1, HPoint(poincare_radius(r) * np.array([c, s])),
                  6.0, 4000, 901, threads=2)
    assert abs(a.tau_hat - b.tau_hat) < 3 * math.hypot(a.stderr, b.stderr)


def test_estimator_thread_determinism():
    a = estimate_chi(0.3, BOOL1, 5.0, 1.0, 300, 77, threads=1)
    b = estimate_chi(0.3, BOOL1, 5.0, 1.0, 300, 77, threads=2)
    assert a.chi_hat == b.chi_hat
    assert np.array_equal(a.sizes, b.sizes)
    ta = estimate_theta(0.6, BOOL1, [4.0, 5.0], 1.0, 300, 78, threads=1)
    tb = estimate_theta(0.6, BOOL1, [4.0, 5.0], 1.0, 300, 78, threads=2)
    assert ta.theta_hat == tb.theta_hat
    ma = estimate_magnetization(0.2, [0.1, 0.3], BOOL1, 5.0, 300, 79, threads=1)
    mb = estimate_magnetization(0.2, [0.1, 0.3], BOOL1, 5.0, 300, 79, threads=2)
    assert ma.m_hat == mb.m_hat and ma.chi_gf_hat == mb.chi_gf_hat


def test_origin_cluster_sizes_match_cluster_stats():
    # the estimator fast path agrees with the Configuration-level analysis
    lam, R, seed = 0.7, 4.5, 131
    sizes, reach = sample_origin_cluster_sizes(lam, BOOL1, R, 1.0, 25, seed)
    for rep in range(25):
        cfg = sample_configuration(lam, R, 2, BOOL1, seed=seed, replica=rep)
        st = cluster_stats(cfg, margin=1.0)
        assert st.origin_cluster_size == sizes[rep]
        assert st.reaches_boundary == reach[rep]


def test_chi_warns_when_not_subcritical():
    with pytest.warns(UserWarning, match="critical estimate"):
        estimate_chi(0.5, BOOL1, 4.0, 1.0, 32, 151, lambda_c_hint=0.4)
