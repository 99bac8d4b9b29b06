import itertools

import numpy as np
import pytest

from robustfts.core import Grid
from robustfts.longrun import (KernelSpec, autocov, clip_negative_eigenvalues, kernel_weight, long_run_cov,
                               select_bandwidth, static_cov)
from robustfts.simulate import FarSpec, simulate_far1


def naive_autocov(X, lag):
    """Two-branch sample autocovariance with explicit loops."""
    n, p = X.shape
    xbar = [sum(X[j, a] for j in range(n)) / n for a in range(p)]
    out = np.zeros((p, p))
    for a in range(p):
        for b in range(p):
            s = 0.0
            if lag >= 0:
                for j in range(n - lag):
                    s += (X[j, a] - xbar[a]) * (X[j + lag, b] - xbar[b])
            else:
                for j in range(-lag, n):
                    s += (X[j, a] - xbar[a]) * (X[j + lag, b] - xbar[b])
            out[a, b] = s / n
    return out


def naive_long_run(X, spec):
    n, p = X.shape
    C = np.zeros((p, p))
    for lag in range(-(n - 1), n):
        w = kernel_weight(spec, lag)
        if w:
            C += w * naive_autocov(X, lag)
    return (C + C.T) / 2


@pytest.mark.parametrize("family", ["bartlett", "parzen", "flat-top"])
def test_window_shape(family):
    k = KernelSpec(family, 1.0)
    u = np.linspace(-3, 3, 601)
    w = k.window(u)
    assert k.window(0.0) == 1.0
    np.testing.assert_array_equal(w, k.window(-u))
    assert np.all(w <= 1.0) and np.all(w >= 0.0)
    assert np.all(w[np.abs(u) > k.support] == 0.0)


def test_kernel_weight_examples():
    assert kernel_weight(KernelSpec("bartlett", 5), 0) == 1.0
    assert kernel_weight(KernelSpec("bartlett", 5), 5) == 0.0
    assert kernel_weight(KernelSpec("bartlett", 4), 2) == 0.5


def test_kernel_spec_validation():
    with pytest.raises(ValueError):
        KernelSpec("gaussian", 1.0)
    with pytest.raises(ValueError):
        KernelSpec("bartlett", 0.0)


def test_autocov_identical_curves_is_zero():
    X = np.tile(np.arange(4.0), (6, 1))
    assert np.all(autocov(X, 0).surface == 0)


def test_autocov_two_curve_hand_expansion():
    c = np.array([1.0, -2.0, 0.5])
    S = autocov(np.vstack([-c, c]), 0).surface
    np.testing.assert_allclose(S, np.outer(c, c), atol=1e-15)


def test_autocov_matches_loops_both_signs(rng):
    X = rng.normal(size=(7, 3))
    for lag in range(-6, 7):
        np.testing.assert_allclose(autocov(X, lag).surface, naive_autocov(X, lag), atol=1e-14)


def test_autocov_lag_out_of_range():
    with pytest.raises(ValueError):
        autocov(np.zeros((3, 2)), 3)
    with pytest.raises(ValueError):
        autocov(np.zeros((3, 2)), -3)


def test_autocov_iid_lag_one_within_monte_carlo_error():
    n, p = 2000, 3
    ref = np.random.default_rng(1)
    mc = np.array([autocov(ref.normal(size=(n, p)), 1).surface for _ in range(200)])
    se = mc.std(axis=0)
    sample = autocov(np.random.default_rng(2).normal(size=(n, p)), 1).surface
    assert np.max(np.abs(sample) / se) < 3.0


def test_long_run_tiny_bandwidth_is_lag_zero(rng):
    X = rng.normal(size=(9, 4))
    np.testing.assert_allclose(long_run_cov(X, KernelSpec("bartlett", 1e-6)).surface, autocov(X, 0).surface,
                               atol=1e-15)


def test_long_run_bartlett_example_against_loop(rng):
    X = rng.normal(size=(5, 3))
    spec = KernelSpec("bartlett", 3)
    expected = naive_autocov(X, 0)
    for lag in (1, 2):
        w = 1 - lag / 3
        expected = expected + w * (naive_autocov(X, lag) + naive_autocov(X, -lag))
    np.testing.assert_allclose(long_run_cov(X, spec).surface, (expected + expected.T) / 2, atol=1e-12)


def test_long_run_constant_series_is_zero():
    assert np.all(long_run_cov(np.ones((8, 3)), KernelSpec("parzen", 2)).surface == 0)


def test_long_run_triple_loop_oracle_small_fixtures():
    seeds = np.random.default_rng(99)
    for n, p in itertools.product(range(2, 7), range(2, 5)):
        for family, h in (("bartlett", 2.5), ("parzen", 4.0), ("flat-top", 3.0), ("bartlett", 50.0)):
            X = seeds.normal(size=(n, p))
            spec = KernelSpec(family, h)
            np.testing.assert_allclose(long_run_cov(X, spec).surface, naive_long_run(X, spec), atol=1e-12)


def test_long_run_symmetric_and_clipped_psd(rng):
    X = rng.normal(size=(12, 6))
    C = long_run_cov(X, KernelSpec("flat-top", 8), clip=True).surface
    assert np.max(np.abs(C - C.T)) <= 1e-10
    vals = np.linalg.eigvalsh(C)
    assert vals.min() >= -1e-8 * vals.max()


def test_clip_negative_eigenvalues_keeps_psd_input(rng):
    A = rng.normal(size=(4, 4))
    P = A @ A.T
    np.testing.assert_array_equal(clip_negative_eigenvalues(P), P)


def test_long_run_needs_two_curves():
    with pytest.raises(ValueError):
        long_run_cov(np.ones((1, 3)), KernelSpec())


def test_long_run_exceeds_static_under_positive_dependence():
    spec = FarSpec(psi=0.8 * np.eye(3), n=500, n_points=21)
    X = simulate_far1(spec, 4)
    lr = long_run_cov(X, KernelSpec("bartlett", 4.0))
    assert np.trace(lr.surface) > np.trace(static_cov(X).surface)
    assert lr.grid == X.grid


def test_select_bandwidth_examples():
    assert select_bandwidth(np.zeros((125, 2))) == 5.0
    assert select_bandwidth(np.zeros((100, 2))) == pytest.approx(100 ** (1 / 3))
    with pytest.raises(ValueError):
        select_bandwidth(np.zeros((8, 2)))
    assert select_bandwidth(np.zeros((8, 2)), override=2.5) == 2.5
    with pytest.raises(ValueError):
        select_bandwidth(np.zeros((20, 2)), override=0.0)


def test_static_cov_grid_defaults():
    C = static_cov(np.eye(3))
    assert C.grid == Grid.uniform(3)
