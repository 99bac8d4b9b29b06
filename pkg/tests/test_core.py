import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from robustfts.core import (FunctionalTimeSeries, Grid, GridMismatchError, MeanCurve, center, gram_matrix,
                            inner_product, mean_curve, norm, trapezoid_weights)

from conftest import make_series


def test_grid_weights_positive_and_sum_to_length():
    g = Grid(np.array([0.0, 0.1, 0.5, 0.55, 2.0]))
    assert np.all(g.weights > 0)
    assert g.weights.sum() == pytest.approx(2.0, abs=1e-15)


@pytest.mark.parametrize("pts", [[0.0], [0.0, 0.0, 1.0], [1.0, 0.5], [0.0, np.nan]])
def test_grid_rejects_bad_points(pts):
    with pytest.raises(ValueError):
        Grid(np.array(pts))


def test_grid_is_read_only():
    g = Grid.uniform(5)
    with pytest.raises(ValueError):
        g.points[0] = 3.0
    with pytest.raises(ValueError):
        g.weights[0] = 3.0


def test_series_rejects_nonfinite_and_wrong_width():
    g = Grid.uniform(3)
    with pytest.raises(ValueError):
        FunctionalTimeSeries(g, np.array([[0.0, np.nan, 1.0]]))
    with pytest.raises(GridMismatchError):
        FunctionalTimeSeries(g, np.zeros((2, 4)))


def test_series_slicing_keeps_type_and_labels():
    X = FunctionalTimeSeries(Grid.uniform(3), np.arange(12.0).reshape(4, 3), ["a", "b", "c", "d"])
    sub = X[1:3]
    assert isinstance(sub, FunctionalTimeSeries)
    assert sub.n_curves == 2 and list(sub.labels) == ["b", "c"]
    assert X[2].n_curves == 1


def test_inner_product_unit_constant():
    g = Grid.uniform(101)
    assert inner_product(np.ones(101), np.ones(101), g) == pytest.approx(1.0, abs=1e-12)


def test_inner_product_fourier_pair_orthogonal():
    g = Grid.uniform(101)
    t = g.points
    assert abs(inner_product(np.sin(2 * np.pi * t), np.cos(2 * np.pi * t), g)) < 1e-6


def test_inner_product_scaled_sine_has_unit_norm():
    g = Grid.uniform(101)
    f = np.sqrt(2) * np.sin(2 * np.pi * g.points)
    # integral of 2 sin^2(2 pi t) over [0, 1] is exactly 1
    assert inner_product(f, f, g) == pytest.approx(1.0, abs=1e-6)
    assert norm(f, g) == pytest.approx(1.0, abs=1e-6)


def test_inner_product_grid_mismatch():
    with pytest.raises(GridMismatchError):
        inner_product(np.ones(5), np.ones(6), Grid.uniform(5))


def test_quadrature_error_shrinks_with_resolution():
    errs = []
    for p in (11, 101, 1001):
        g = Grid.uniform(p)
        errs.append(abs(inner_product(g.points, g.points, g) - 1.0 / 3.0))
    assert errs[0] > errs[1] > errs[2]


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, 7, elements=st.floats(-1e3, 1e3)), arrays(np.float64, 7, elements=st.floats(-1e3, 1e3)))
def test_inner_product_symmetric_and_nonnegative(f, g):
    grid = Grid(np.array([0.0, 0.1, 0.3, 0.35, 0.6, 0.9, 1.0]))
    assert inner_product(f, g, grid) == inner_product(g, f, grid)
    assert inner_product(f, f, grid) >= 0.0


def test_gram_matrix_matches_pairwise_products(rng):
    g = Grid.uniform(9)
    C = rng.normal(size=(4, 9))
    G = gram_matrix(C, g)
    for i in range(4):
        for j in range(4):
            assert G[i, j] == pytest.approx(inner_product(C[i], C[j], g), abs=1e-12)


def test_mean_curve_examples():
    X = make_series([np.zeros(4), np.full(4, 2.0)])
    np.testing.assert_array_equal(mean_curve(X).values, np.ones(4))
    np.testing.assert_array_equal(mean_curve(X, [1, 0]).values, np.zeros(4))


def test_mean_curve_matches_per_point_average(rng):
    vals = rng.normal(size=(5, 8))
    X = make_series(vals)
    mu = mean_curve(X)
    expected = [sum(vals[i, w] for i in range(5)) / 5 for w in range(8)]
    np.testing.assert_allclose(mu.values, expected, atol=1e-14)
    np.testing.assert_array_equal(mean_curve(X, np.ones(5)).values, mu.values)


@pytest.mark.parametrize("w", [[0, 0], [1.5, 0], [-0.1, 1], [1]])
def test_mean_curve_rejects_bad_weights(w):
    with pytest.raises(ValueError):
        mean_curve(make_series(np.ones((2, 3))), w)


def test_center_examples(rng):
    X = make_series(np.tile(rng.normal(size=6), (3, 1)))
    assert np.all(center(X, mean_curve(X)).values == 0)

    Y = make_series(rng.normal(size=(4, 10)))
    mu = mean_curve(Y)
    once = center(Y, mu)
    np.testing.assert_allclose(once.values.sum(axis=0), 0, atol=1e-10)
    twice = center(once, mu)
    np.testing.assert_allclose(twice.values, Y.values - 2 * mu.values, atol=1e-14)


def test_center_grid_mismatch():
    X = make_series(np.ones((2, 3)))
    mu = MeanCurve(Grid.uniform(3, 0, 2), np.ones(3))
    with pytest.raises(GridMismatchError):
        center(X, mu)


def test_trapezoid_weights_exact_for_linear():
    pts = np.array([0.0, 0.2, 0.7, 1.0])
    # integral of 3t + 1 on [0, 1] is 2.5
    assert trapezoid_weights(pts) @ (3 * pts + 1) == pytest.approx(2.5, abs=1e-15)
