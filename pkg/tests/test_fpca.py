import numpy as np
import pytest
from scipy.linalg import subspace_angles

from robustfts.core import FunctionalTimeSeries, Grid, MeanCurve, gram_matrix, inner_product
from robustfts.fpca import (FunctionalPCA, PrincipalDecomposition, covariance_surface, eigen_decompose, fpca,
                            project_scores, reconstruct, select_K_cv)
from robustfts.longrun import CovarianceSurface
from robustfts.simulate import FarSpec, fourier_basis, simulate_far1

GRID = Grid.uniform(51)
BASIS = fourier_basis(5, GRID)


def surface(kernel):
    return CovarianceSurface(GRID, kernel)


def test_rank_one_kernel():
    phi = BASIS[1]
    vals, comps = eigen_decompose(surface(np.outer(phi, phi)), 1)
    assert vals[0] == pytest.approx(inner_product(phi, phi, GRID) ** 1, abs=1e-8)
    assert abs(inner_product(comps[0], phi, GRID)) == pytest.approx(1.0, abs=1e-8)
    # the largest-magnitude entry is positive, so a second call is identical
    assert comps[0][np.argmax(np.abs(comps[0]))] > 0
    np.testing.assert_array_equal(eigen_decompose(surface(np.outer(-phi, -phi)), 1)[1], comps)


def test_two_weighted_rank_one_kernels():
    a, b = BASIS[0], BASIS[2]
    vals, comps = eigen_decompose(surface(3 * np.outer(a, a) + np.outer(b, b)), 2)
    np.testing.assert_allclose(vals, [3.0, 1.0], atol=1e-8)


def test_zero_surface():
    vals, comps = eigen_decompose(surface(np.zeros((51, 51))), 3)
    assert np.all(vals == 0)
    np.testing.assert_allclose(gram_matrix(comps, GRID), np.eye(3), atol=1e-8)


def test_too_many_components():
    with pytest.raises(ValueError):
        eigen_decompose(surface(np.eye(51)), 52)


def test_orthonormal_on_nonuniform_grid(rng):
    g = Grid(np.sort(np.concatenate([[0.0, 1.0], rng.uniform(0, 1, 30)])))
    A = rng.normal(size=(32, 32))
    vals, comps = eigen_decompose(CovarianceSurface(g, A @ A.T), 6)
    np.testing.assert_allclose(gram_matrix(comps, g), np.eye(6), atol=1e-8)
    assert np.all(np.diff(vals) <= 0)


def test_project_scores_examples(rng):
    comps = BASIS[:3]
    np.testing.assert_allclose(project_scores(2 * comps[0], comps, GRID), [[2, 0, 0]], atol=1e-10)
    np.testing.assert_allclose(project_scores(BASIS[4], comps, GRID), [[0, 0, 0]], atol=1e-10)
    X = rng.normal(size=(6, 51))
    S = project_scores(X, comps, GRID)
    for i in range(6):
        for k in range(3):
            assert S[i, k] == pytest.approx(sum(X[i, w] * comps[k, w] * GRID.weights[w] for w in range(51)),
                                            abs=1e-12)


def _sample(rng, n=40):
    return FunctionalTimeSeries(GRID, rng.normal(size=(n, 5)) * [3, 2, 1, 0.5, 0.2] @ BASIS)


@pytest.mark.parametrize("kind", ["static", "long-run"])
def test_decomposition_invariants(rng, kind):
    X = _sample(rng)
    d = fpca(X, 4, kind)
    np.testing.assert_allclose(gram_matrix(d.components, GRID), np.eye(4), atol=1e-8)
    assert np.all(np.diff(d.eigenvalues) <= 0)
    np.testing.assert_allclose(d.scores, project_scores(X.values - d.mean.values, d.components, GRID), atol=1e-8)
    if kind == "static":
        v = d.scores.var(axis=0)
        assert np.all(np.diff(v) <= 1e-10)


def test_full_rank_reconstruction_and_parseval(rng):
    X = FunctionalTimeSeries(Grid.uniform(8), rng.normal(size=(30, 8)))
    d = fpca(X, 8, "static")
    np.testing.assert_allclose(reconstruct(d), X.values, atol=1e-6)
    d3 = fpca(X, 3, "static")
    for i in range(5):
        r = X.values[i] - reconstruct(d3, i)
        lhs = inner_product(r, r, X.grid)
        c = X.values[i] - d3.mean.values
        rhs = inner_product(c, c, X.grid) - np.sum(d3.scores[i] ** 2)
        assert lhs == pytest.approx(rhs, abs=1e-8)


def test_zero_component_reconstruction_is_mean():
    mu = MeanCurve(GRID, np.ones(51))
    d = PrincipalDecomposition(mu, np.zeros((0, 51)), np.zeros(0), np.zeros((4, 0)), np.ones(4))
    np.testing.assert_array_equal(reconstruct(d), np.ones((4, 51)))


def test_reconstruction_error_nonincreasing_in_K(rng):
    X = _sample(rng)
    errs = []
    for K in range(1, 7):
        d = fpca(X, K, "long-run")
        r = X.values - reconstruct(d)
        errs.append(float(np.sum((r**2) @ GRID.weights)))
    assert all(a >= b - 1e-10 for a, b in zip(errs, errs[1:]))


def test_weighted_fpca_ignores_zero_weight_curves(rng):
    X = _sample(rng, 20)
    w = np.ones(20)
    w[[3, 7]] = 0
    d = fpca(X, 3, "static", weights=w)
    ref = fpca(FunctionalTimeSeries(GRID, X.values[w > 0]), 3, "static")
    np.testing.assert_allclose(d.components, ref.components, atol=1e-10)
    assert d.scores.shape == (20, 3)


def _last_curve_forecaster(history, K):
    d = fpca(FunctionalTimeSeries(GRID, history), K, "static")
    return reconstruct(d, scores=d.scores[-1])


def _true_dynamics_forecaster(history, K):
    # the true score dynamics of the rank-two fixture below
    d = fpca(FunctionalTimeSeries(GRID, history), K, "static")
    return reconstruct(d, scores=0.9 * d.scores[-1])


def test_select_K_rank_two_noiseless():
    X = simulate_far1(FarSpec(psi=0.9 * np.eye(2), n=200, n_points=51), 3)
    K, errs = select_K_cv(X[:100], X[100:], _true_dynamics_forecaster, 5, return_errors=True)
    assert K == 2
    assert errs[0] > errs[1]


def test_select_K_single_candidate(rng):
    X = _sample(rng, 12)
    assert select_K_cv(X[:10], X[10:], _last_curve_forecaster, 1) == 1


def test_select_K_white_noise_is_scan_minimum(rng):
    X = FunctionalTimeSeries(GRID, rng.normal(size=(25, 51)))
    K, errs = select_K_cv(X[:20], X[20:], _last_curve_forecaster, 6, return_errors=True)
    brute = []
    for k in range(1, 7):
        preds = [_last_curve_forecaster(X.values[:i], k) for i in range(20, 25)]
        brute.append(np.mean((np.array(preds) - X.values[20:]) ** 2))
    np.testing.assert_allclose(errs, brute, rtol=1e-12)
    assert errs[K - 1] <= min(brute)


def test_select_K_empty_validation(rng):
    X = _sample(rng, 10)
    with pytest.raises(ValueError):
        select_K_cv(X, X[:0], _last_curve_forecaster, 3)


def test_estimator_api(rng):
    X = _sample(rng).values
    est = FunctionalPCA(n_components=3, covariance="static", grid=GRID.points).fit(X)
    ratio = est.explained_variance_ratio_
    assert np.all((ratio >= 0) & (ratio <= 1)) and ratio.sum() <= 1 + 1e-12
    Z = est.transform(X)
    np.testing.assert_allclose(Z, est.decomposition_.scores, atol=1e-10)
    assert est.inverse_transform(Z).shape == X.shape
    assert est.get_params()["n_components"] == 3


def test_long_run_components_match_classical_subspace_on_iid(rng):
    X = _sample(rng, 200)
    a = fpca(X, 2, "long-run").components * np.sqrt(GRID.weights)
    b = fpca(X, 2, "static").components * np.sqrt(GRID.weights)
    assert np.degrees(subspace_angles(a.T, b.T).max()) < 15


def test_covariance_surface_rejects_unknown_kind(rng):
    with pytest.raises(ValueError):
        covariance_surface(_sample(rng), "spectral")
