"""Tests for the errors-in-variables regression estimators."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repdeconv.density import estimate_density
from repdeconv.error_model import estimated_cf, known_cf, tail_correct
from repdeconv.errors import AllGuarded
from repdeconv.regression import (
    estimate_numerator,
    estimate_regression,
    guard_threshold,
    naive_regression,
)
from repdeconv.samples import RegressionSample, ReplicatedSample


def regression_data(n=120, sigma2=0.01, seed=0, g=lambda x: np.sin(2 * np.pi * x)):
    rng = np.random.default_rng(seed)
    x = rng.uniform(size=n)
    w = x[:, None] + rng.laplace(0.0, np.sqrt(sigma2 / 2), (n, 2))
    return RegressionSample(ReplicatedSample.from_array(w), g(x) + 0.1 * rng.normal(size=n))


class TestNumerator:

    def test_zero_response(self):
        d = regression_data()
        d0 = RegressionSample(d.base, np.zeros(d.n))
        np.testing.assert_array_equal(estimate_numerator(d0, estimated_cf(d.base), 0.1), 0.0)

    def test_unit_response_is_density(self):
        d = regression_data(seed=1)
        d1 = RegressionSample(d.base, np.ones(d.n))
        cf = estimated_cf(d.base)
        grid = np.linspace(0, 1, 21)
        np.testing.assert_allclose(estimate_numerator(d1, cf, 0.1, grid=grid),
                                   estimate_density(d.base, cf, 0.1, grid=grid).values, rtol=1e-12, atol=1e-14)


class TestEstimateRegression:

    def test_known_cf_identity(self):
        d = regression_data(seed=2)
        cf = known_cf("laplace", 0.01)
        grid = np.linspace(0, 1, 51)
        a = estimate_regression(d, cf, 0.08, grid=grid)
        b = estimate_regression(d, cf, 0.08, grid=grid, known=True)
        np.testing.assert_allclose(a.ratio, b.ratio, atol=1e-10, equal_nan=True)
        assert a.method == "estimated_cf(closed_form)" and b.method == "known_cf"

    def test_noiseless_constant(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(size=200)
        d = RegressionSample(ReplicatedSample.from_array(np.column_stack([x, x])), np.full(200, 2.5))
        est = estimate_regression(d, estimated_cf(d.base), 0.1, grid=np.linspace(0.2, 0.8, 31))
        assert np.nanmax(np.abs(est.ratio - 2.5)) < 0.01

    def test_zero_response(self):
        d = regression_data(seed=4)
        d0 = RegressionSample(d.base, np.zeros(d.n))
        est = estimate_regression(d0, estimated_cf(d.base), 0.1)
        assert np.all(est.ratio[est.defined] == 0.0)

    def test_guard_marks_far_points(self):
        d = regression_data(seed=5)
        est = estimate_regression(d, estimated_cf(d.base), 0.05, grid=np.linspace(-3, 4, 141))
        assert not est.defined[0] and not est.defined[-1]
        assert np.isnan(est.values[0])
        assert est.eps == pytest.approx(guard_threshold(est.denominator))

    def test_all_guarded(self):
        d = regression_data(seed=6)
        with pytest.raises(AllGuarded):
            estimate_regression(d, estimated_cf(d.base), 0.05, grid=np.linspace(50, 60, 5))

    @given(st.floats(-10, 10), st.floats(0.1, 10))
    @settings(max_examples=20, deadline=None)
    def test_affine_in_y(self, shift, scale):
        d = regression_data(n=40, seed=7)
        cf = tail_correct(d.base, np.linspace(0, 40, 81))
        grid = np.linspace(0.1, 0.9, 9)
        base = estimate_regression(d, cf, 0.1, grid=grid)
        moved = estimate_regression(RegressionSample(d.base, scale * d.y + shift), cf, 0.1, grid=grid)
        np.testing.assert_allclose(moved.ratio, scale * base.ratio + shift, rtol=1e-8, atol=1e-8)


class TestNaiveRegression:

    def test_constant_response(self):
        d = regression_data(seed=8)
        est = naive_regression(RegressionSample(d.base, np.full(d.n, -1.5)), 0.1, grid=np.linspace(0, 1, 11))
        np.testing.assert_allclose(est.ratio, -1.5, rtol=1e-10)

    def test_linear_noiseless(self):
        rng = np.random.default_rng(9)
        x = rng.uniform(size=500)
        d = RegressionSample(ReplicatedSample.from_array(np.column_stack([x, x])), 2 * x + 1)
        est = naive_regression(d, 0.05, grid=np.array([0.3, 0.5, 0.7]))
        np.testing.assert_allclose(est.ratio, [1.6, 2.0, 2.4], atol=0.02)
