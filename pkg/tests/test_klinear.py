import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import best_bipartition_rss
from perfdiscrim.affine import fit_affine
from perfdiscrim.klinear import (
    KLinearConfig,
    klinear_cluster,
    klinear_run,
    tube_pair_init,
)
from perfdiscrim.scoring import label_agreement
from perfdiscrim.traces import PointSet


def planted(rng, n, slopes, intercepts=None, sigma=0.1):
    k = len(slopes)
    intercepts = intercepts or [0.0] * k
    lab = np.arange(n) % k
    x = rng.uniform(0, 10, n)
    y = np.take(slopes, lab) * x + np.take(intercepts, lab) + rng.normal(0, sigma, n)
    return PointSet(x, y), lab


def test_two_lines_are_recovered(rng):
    ps, lab = planted(rng, 300, [1.0, 3.0], [0.0, 5.0])
    c = klinear_cluster(ps, KLinearConfig(k=2, seed=1)).canonical()
    assert label_agreement(c.assignments, lab) == 1.0
    assert c.centroids[0].slope[0] == pytest.approx(1.0, abs=0.02)
    assert c.centroids[1].slope[0] == pytest.approx(3.0, abs=0.02)


def test_small_sets_reach_brute_force_optimum():
    hits = 0
    for seed in range(15):
        rng = np.random.default_rng(seed)
        ps, _ = planted(rng, 10, [0.5, 2.0], [1.0, -1.0], sigma=0.5)
        best = klinear_cluster(ps, KLinearConfig(k=2, restarts=50, seed=seed))
        opt = best_bipartition_rss(ps.X[:, 0], ps.y)
        assert best.rss >= opt - 1e-9 * max(1.0, opt)
        hits += abs(best.rss - opt) <= 1e-9 * max(1.0, opt)
    assert hits >= 14


def test_reported_rss_matches_assignment(rng):
    ps, _ = planted(rng, 120, [1.0, 2.0, 4.0])
    c = klinear_cluster(ps, KLinearConfig(k=3, seed=0))
    total = sum(
        fit_affine(ps.X[c.assignments == h], ps.y[c.assignments == h]).rss for h in range(3)
    )
    assert c.rss == pytest.approx(total, rel=1e-9)
    assert c.mse == pytest.approx(c.rss / len(ps))
    np.testing.assert_allclose(np.sum(c.residuals(ps) ** 2), c.rss, rtol=1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(6, 60), k=st.integers(2, 4))
def test_rss_monotone_and_terminates(seed, n, k):
    rng = np.random.default_rng(seed)
    ps = PointSet(rng.uniform(0, 1, n), rng.normal(0, 1, n))
    init = (np.arange(n) % k)[rng.permutation(n)]
    run = klinear_run(ps, init, k, max_iterations=100)
    hist = np.array(run.rss_history)
    assert np.all(np.diff(hist) <= 1e-9 * np.maximum(1.0, hist[:-1]))
    assert 1 <= run.iterations <= 100
    assert run.rss == hist[-1]


def test_iteration_cap_is_flagged(rng):
    ps, _ = planted(rng, 200, [1.0, 1.2, 1.4, 1.6], sigma=1.0)
    init = np.zeros(200, dtype=int)
    init[::2] = 1
    run = klinear_run(ps, init, 4, max_iterations=1)
    assert run.iterations == 1
    assert "max-iterations" in run.flags


def test_empty_cluster_is_reseeded(rng):
    ps, _ = planted(rng, 50, [1.0, 5.0])
    run = klinear_run(ps, np.zeros(50, dtype=int), 2)
    assert run.empty == ()
    assert np.bincount(run.assignments, minlength=2).min() > 0


def test_same_seed_same_result(rng):
    ps, _ = planted(rng, 100, [1.0, 2.0, 3.0], sigma=0.5)
    a = klinear_cluster(ps, KLinearConfig(k=3, seed=7))
    b = klinear_cluster(ps, KLinearConfig(k=3, seed=7))
    np.testing.assert_array_equal(a.assignments, b.assignments)
    assert a.rss == b.rss


def test_k_one_is_a_single_fit(rng):
    ps, _ = planted(rng, 40, [1.0, 2.0])
    c = klinear_cluster(ps, KLinearConfig(k=1))
    assert c.rss == pytest.approx(fit_affine(ps.X, ps.y).rss)
    assert np.all(c.assignments == 0)


def test_degenerate_inputs():
    with pytest.raises(ValueError, match="at least k"):
        klinear_cluster(PointSet([1.0, 2.0], [1.0, 2.0]), KLinearConfig(k=3))
    same = PointSet(np.ones(6), np.full(6, 2.0))
    c = klinear_cluster(same, KLinearConfig(k=3))
    assert "identical-points" in c.flags and len(c.empty) == 2
    assert c.rss == pytest.approx(0.0, abs=1e-20)


def test_tube_init_recovers_planted_lines(rng):
    ps, lab = planted(rng, 90, [1.0, 4.0, 8.0], sigma=0.05)
    init = tube_pair_init(ps, 3, epsilon=0.3, seed=0)
    assert not init.fallback
    assert label_agreement(init.assignments, lab) > 0.9
    c = klinear_cluster(ps, KLinearConfig(k=3, init="tube-pairs", seed=0))
    assert label_agreement(c.assignments, lab) == 1.0
    assert "tube-fallback" not in c.flags


def test_tube_init_falls_back_on_a_single_line():
    x = np.arange(12, dtype=float)
    ps = PointSet(x, 2 * x)
    init = tube_pair_init(ps, 3, epsilon=0.1, seed=0)
    assert init.fallback
    c = klinear_cluster(ps, KLinearConfig(k=3, init="tube-pairs", restarts=2))
    assert "tube-fallback" in c.flags


def test_canonical_orders_by_slope(rng):
    ps, _ = planted(rng, 90, [5.0, 1.0, 3.0], sigma=0.01)
    c = klinear_cluster(ps, KLinearConfig(k=3, seed=2)).canonical()
    slopes = [m.slope[0] for m in c.centroids]
    assert slopes == sorted(slopes)
    for h, m in enumerate(c.centroids):
        mask = c.assignments == h
        np.testing.assert_allclose(m(ps.X[mask]), ps.y[mask], atol=0.1)


def test_config_validation():
    with pytest.raises(ValueError):
        KLinearConfig(k=0)
    with pytest.raises(ValueError):
        KLinearConfig(k=2, init="kmeans++")
    with pytest.raises(ValueError):
        KLinearConfig(k=2, tube_epsilon=0.0)


def test_two_exact_lines_reach_zero_rss():
    x = np.r_[np.arange(5.0), np.arange(5.0)]
    y = np.r_[x[:5], 2 * x[5:] + 5]
    ps = PointSet(x, y)
    c = klinear_cluster(ps, KLinearConfig(k=2, restarts=20, seed=0))
    assert best_bipartition_rss(x, y) == pytest.approx(0.0, abs=1e-12)
    assert c.rss < 1e-18
    assert label_agreement(c.assignments, np.r_[np.zeros(5), np.ones(5)].astype(int)) == 1.0


def test_ten_random_points_best_of_fifty():
    rng = np.random.default_rng(77)
    ps = PointSet(rng.uniform(0, 1, 10), rng.uniform(0, 1, 10))
    c = klinear_cluster(ps, KLinearConfig(k=2, restarts=50, seed=0))
    assert abs(c.rss - best_bipartition_rss(ps.X[:, 0], ps.y)) <= 1e-9


def test_tube_init_parallel_lines():
    eps = 0.1
    x = np.tile(np.linspace(0, 10, 30), 2)
    y = np.r_[x[:30], x[30:] + 10 * eps]
    init = tube_pair_init(PointSet(x, y), 2, eps, seed=0)
    assert not init.fallback
    truth = np.r_[np.zeros(30), np.ones(30)].astype(int)
    assert label_agreement(init.assignments, truth) == 1.0


def test_tube_init_wide_epsilon_falls_back(rng):
    ps = PointSet(rng.uniform(0, 1, 15), rng.uniform(0, 1, 15))
    assert tube_pair_init(ps, 2, epsilon=10.0, seed=0).fallback
    x = np.arange(10.0)
    collinear = tube_pair_init(PointSet(x, 3 * x), 2, epsilon=0.5, seed=0)
    assert collinear.fallback and len(collinear.lines) == 1
