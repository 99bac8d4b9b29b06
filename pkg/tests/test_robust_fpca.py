import itertools
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats
from scipy.linalg import subspace_angles

from robustfts.core import FunctionalTimeSeries, Grid, gram_matrix, inner_product
from robustfts.fpca import fpca
from robustfts.robust_fpca import (QN_CONSTANT, RobustFunctionalPCA, correction_factor, integrated_errors,
                                   lower_median, outlier_weights, qn_dispersion, qn_order, rapca, robust_fpca)
from robustfts.simulate import fourier_basis

GRID = Grid.uniform(41)
BASIS = fourier_basis(5, GRID)
TABLE = {2: 0.399, 3: 0.994, 4: 0.512, 5: 0.844, 6: 0.611, 7: 0.857, 8: 0.669, 9: 0.872}


def brute_qn(x):
    diffs = sorted(abs(a - b) for a, b in itertools.combinations(x, 2))
    n = len(x)
    return QN_CONSTANT * TABLE.get(n, n / (n + 1.4) if n % 2 else n / (n + 3.8)) * diffs[comb(n // 2 + 1, 2) - 1]


def angle_deg(A, B):
    w = np.sqrt(GRID.weights)
    return np.degrees(subspace_angles((A * w).T, (B * w).T).max())


def test_correction_factor_table_and_parity():
    for n, c in TABLE.items():
        assert correction_factor(n) == c
    assert correction_factor(10) == 10 / 13.8
    assert correction_factor(11) == 11 / 12.4
    gaps = [abs(correction_factor(n) - 1) for n in range(10, 1001)]
    odd, even = gaps[1::2], gaps[0::2]
    assert all(a > b for a, b in zip(odd, odd[1:])) and all(a > b for a, b in zip(even, even[1:]))
    with pytest.raises(ValueError):
        correction_factor(1)


def test_qn_examples():
    assert qn_dispersion(np.full(7, 2.5)) == 0.0
    assert qn_order(4) == 3
    assert qn_dispersion(np.arange(4.0)) == pytest.approx(2.2219 * 0.512, abs=1e-4)
    with pytest.raises(ValueError):
        qn_dispersion([1.0])


def test_qn_against_enumeration(rng):
    for _ in range(100):
        x = rng.normal(size=rng.integers(2, 41)) * rng.uniform(0.1, 10)
        assert qn_dispersion(x) == pytest.approx(brute_qn(list(x)), abs=1e-10)


def test_qn_batched_matches_columns(rng):
    M = rng.normal(size=(15, 6))
    np.testing.assert_allclose(qn_dispersion(M, axis=0), [qn_dispersion(M[:, j]) for j in range(6)], atol=0)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=30), st.floats(-50, 50), st.floats(-1e3, 1e3))
def test_qn_scale_and_translation(xs, a, c):
    x = np.array(xs)
    assert qn_dispersion(a * x) == pytest.approx(abs(a) * qn_dispersion(x), rel=1e-12, abs=1e-9)
    # exact translation invariance needs shifts that do not perturb the differences
    x_int = np.round(x)
    assert qn_dispersion(x_int + np.round(c)) == qn_dispersion(x_int)


def _rank_one(rng, n=60, noise=1e-3):
    u = BASIS[1]
    return np.outer(rng.normal(size=n) * 3, u) + noise * rng.normal(size=(n, GRID.size)), u


def test_rapca_rank_one(rng):
    X, u = _rank_one(rng)
    r = rapca(X - X.mean(axis=0), 1, GRID)
    assert abs(inner_product(r.components[0], u, GRID)) >= 0.99


def test_rapca_orthonormal_and_near_classical(rng):
    X = rng.normal(size=(200, 5)) * [4, 3, 1, 0.5, 0.3] @ BASIS
    Xc = X - X.mean(axis=0)
    r = rapca(Xc, 3, GRID)
    np.testing.assert_allclose(gram_matrix(r.components, GRID), np.eye(3), atol=1e-8)
    classical = fpca(FunctionalTimeSeries(GRID, X), 2, "static").components
    assert angle_deg(r.components[:2], classical) <= 15


def test_rapca_resists_gross_outlier(rng):
    X, u = _rank_one(rng, noise=0.05)
    X[5] = 100 * np.linalg.norm(X[0]) / np.sqrt(GRID.size) * BASIS[3]
    Xc = X - np.median(X, axis=0)
    assert abs(inner_product(rapca(Xc, 1, GRID).components[0], u, GRID)) >= 0.95
    classical = fpca(FunctionalTimeSeries(GRID, X), 1, "static").components[0]
    assert abs(inner_product(classical, u, GRID)) < 0.9


def test_rapca_rejects_too_many_components(rng):
    with pytest.raises(ValueError):
        rapca(rng.normal(size=(4, 41)), 4, GRID)


def test_integrated_errors_examples(rng):
    comps = BASIS[:2]
    S = rng.normal(size=(5, 2))
    assert np.all(integrated_errors(S @ comps, comps, S, GRID) <= 1e-10)
    X = rng.normal(size=(5, 41))
    np.testing.assert_allclose(integrated_errors(X, np.zeros((0, 41)), np.zeros((5, 0)), GRID),
                               (X**2) @ GRID.weights, atol=1e-12)
    v = integrated_errors(X, comps, S, GRID)
    for i in range(5):
        r = [X[i, w] - sum(S[i, k] * comps[k, w] for k in range(2)) for w in range(41)]
        assert v[i] == pytest.approx(sum(r[w] ** 2 * GRID.weights[w] for w in range(41)), abs=1e-10)


def test_outlier_weight_examples():
    ow = outlier_weights(np.array([1, 1, 1, 1, 100.0]), 3)
    np.testing.assert_array_equal(ow.w, [1, 1, 1, 1, 0])
    assert ow.threshold == 4.0
    assert np.all(outlier_weights(np.full(6, 2.0), 0.1).w == 1)
    with pytest.raises(ValueError):
        outlier_weights(np.ones(3), 0.0)
    assert lower_median([4, 1, 3, 2]) == 2


def test_outlier_weights_nominal_rejection_rate():
    # chi-square v with many degrees of freedom: median ~ k, sd ~ sqrt(2k)
    v = stats.chi2.rvs(400, size=10_000, random_state=np.random.default_rng(5))
    frac = 1 - outlier_weights(v, 3.0).w.mean()
    assert 0.005 <= frac <= 0.035


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 1e4), min_size=1, max_size=40), st.floats(0.01, 20), st.floats(0.01, 20))
def test_weights_monotone_in_lambda(v, l1, l2):
    lo, hi = sorted((l1, l2))
    w_lo = outlier_weights(np.array(v), lo).w
    w_hi = outlier_weights(np.array(v), hi).w
    assert np.all(w_hi >= w_lo)
    assert w_lo.sum() >= 1


def test_robust_fpca_clean_rank_two(rng):
    X = FunctionalTimeSeries(GRID, rng.normal(size=(80, 2)) * [3, 2] @ BASIS[1:3] + 0.01 * rng.normal(size=(80, 41)))
    r = robust_fpca(X, 2, lam=1e6, kind="static")
    assert np.all(r.decomposition.weights == 1)
    assert angle_deg(r.decomposition.components, fpca(X, 2, "static").components) <= 10


def test_robust_fpca_flags_gross_outliers(rng):
    clean = rng.normal(size=(100, 2)) * [3, 2] @ BASIS[1:3] + 0.05 * rng.normal(size=(100, 41))
    idx = rng.choice(100, size=10, replace=False)
    clean[idx] += 20 * BASIS[4]
    r = robust_fpca(FunctionalTimeSeries(GRID, clean), 2, lam=3)
    assert np.all(r.decomposition.weights[idx] == 0)
    assert np.all(r.outliers.v[idx] > 100 * r.outliers.s)


def test_robust_fpca_too_few_survivors(rng):
    # five median-centred curves span only four dimensions, so six are needed for a nonzero residual
    X = FunctionalTimeSeries(GRID, rng.normal(size=(6, 41)))
    with pytest.raises(ValueError):
        robust_fpca(X, 4, lam=1e-9)


def test_robust_fpca_infinite_lambda_matches_classical(rng):
    X = FunctionalTimeSeries(GRID, rng.normal(size=(60, 5)) * [3, 2, 1, 0.5, 0.2] @ BASIS)
    r = robust_fpca(X, 3, lam=np.inf, kind="long-run")
    assert np.all(r.decomposition.weights == 1)
    assert angle_deg(r.decomposition.components, fpca(X, 3, "long-run").components) <= 1e-6


def test_breakdown_forty_percent(rng):
    n = 100
    clean = rng.normal(size=(n, 2)) * [3, 1] @ BASIS[1:3] + 0.05 * rng.normal(size=(n, 41))
    first = fpca(FunctionalTimeSeries(GRID, clean), 1, "static").components[0]
    dirty = clean.copy()
    bad = rng.choice(n, size=40, replace=False)
    dirty[bad] = 1000 * rng.normal(size=(40, 41))
    comp = robust_fpca(FunctionalTimeSeries(GRID, dirty), 1, lam=3, kind="static").decomposition.components[0]
    assert abs(inner_product(comp, first, GRID)) >= 0.9


def test_estimator_weights(rng):
    X = rng.normal(size=(30, 2)) * [3, 2] @ BASIS[1:3] + 0.05 * rng.normal(size=(30, 41))
    X[4] += 30 * BASIS[4]
    est = RobustFunctionalPCA(n_components=2, covariance="static").fit(X)
    assert est.weights_[4] == 0
    assert est.transform(X).shape == (30, 2)
