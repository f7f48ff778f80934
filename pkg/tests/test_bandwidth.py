"""Tests for cross-validation and plug-in bandwidth selection."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repdeconv.bandwidth import (
    ReferenceMISE,
    SmoothnessParams,
    bin_sample,
    cv_objective,
    cv_pair_sums,
    cv_weights,
    default_search_grid,
    fit_reference,
    l_roughness,
    plugin_bandwidth_density,
    rate_q_n,
    select_cv_bandwidth,
    theoretical_bandwidth,
)
from repdeconv.error_model import known_cf, unit_cf
from repdeconv.errors import AllDegenerate, DegenerateError
from repdeconv.numerics import l2_kernel
from repdeconv.samples import RegressionSample, ReplicatedSample

# Oracle: direct double-sum enumeration with mpmath quadrature of L_2.
CV_TOY = 4.579691228014030910
# Roughness and second moment of K, closed form
R_K = 2048.0 / 3003.0 / (2.0 * np.pi)
MU2_K = 6.0


def toy_regression():
    s = ReplicatedSample([[0.0, 0.3], [1.0, 1.4], [2.1, 1.9]])
    return RegressionSample(s, np.array([1.0, 3.0, 2.0]))


def curve_data(n=100, seed=0, sigma2=0.005):
    rng = np.random.default_rng(seed)
    x = rng.uniform(size=n)
    w = x[:, None] + rng.normal(0.0, np.sqrt(sigma2), (n, 2))
    return RegressionSample(ReplicatedSample.from_array(w), np.sin(2 * np.pi * x) + 0.2 * rng.normal(size=n))


class TestRateFormulas:

    def test_ordinary(self):
        assert theoretical_bandwidth(1000, SmoothnessParams(2, 3)) == pytest.approx(1000 ** (-1 / 9), rel=1e-12)
        assert theoretical_bandwidth(1000, SmoothnessParams(2, 3)) == pytest.approx(0.46416, abs=1e-5)

    def test_supersmooth(self):
        p = SmoothnessParams(alpha=2, beta=2, D=2)
        assert theoretical_bandwidth(np.exp(4), p, "supersmooth") == pytest.approx(1.0)

    def test_q_n(self):
        assert rate_q_n(100, SmoothnessParams(2, 3)) == pytest.approx(0.12915, abs=1e-5)

    @pytest.mark.parametrize("n", [2, 10, 10**6])
    def test_q_n_beta_one(self, n):
        assert rate_q_n(n, SmoothnessParams(2, 1)) == 1.0


class TestCVObjective:

    def test_toy_enumeration(self):
        d = toy_regression()
        assert cv_objective(d, 0.8, known_cf("laplace", 0.1)) == pytest.approx(CV_TOY, rel=1e-9)

    def test_pair_sums_direct(self):
        d = toy_regression()
        cf = known_cf("laplace", 0.1)
        p = cv_pair_sums(d, 0.8, cf)
        g = d.base.groups
        direct = np.array([[l2_kernel(np.subtract.outer(g[k], g[j]), 0.8, cf).sum() for j in range(3)]
                           for k in range(3)])
        np.testing.assert_allclose(p, direct, atol=1e-13)

    @given(st.floats(0.02, 1.0))
    @settings(max_examples=15, deadline=None)
    def test_weights_row_stochastic(self, h):
        d = curve_data(n=30, seed=1)
        s = cv_weights(d, h, known_cf("normal", 0.005))
        np.testing.assert_allclose(s.sum(axis=1), 1.0, atol=1e-10)

    @pytest.mark.parametrize("h", [0.05, 0.1, 0.3])
    def test_constant_response_zero(self, h):
        d = curve_data(n=40, seed=2)
        d = RegressionSample(d.base, np.full(d.n, 3.0))
        assert cv_objective(d, h, known_cf("normal", 0.005)) == pytest.approx(0.0, abs=1e-18)

    def test_degenerate_is_inf(self):
        # tiny h: each group only sees itself
        d = curve_data(n=20, seed=3, sigma2=1e-8)
        assert cv_objective(d, 1e-4, unit_cf()) == np.inf

    def test_binned_close_to_exact(self):
        d = curve_data(seed=4)
        cf = known_cf("normal", 0.005)
        b = bin_sample(d)
        for h in (0.04, 0.08):
            exact = cv_objective(d, h, cf)
            binned = cv_objective(d, h, cf, binned=b)
            assert abs(binned - exact) < 0.02 * exact

    def test_bin_counts(self):
        d = curve_data(seed=5)
        b = bin_sample(d)
        assert b.counts.shape == (d.n, 200)
        np.testing.assert_array_equal(b.counts.sum(axis=1), 2.0)


class TestSelectCV:

    def test_interior_minimum(self):
        d = curve_data(seed=6)
        res = select_cv_bandwidth(d, known_cf("normal", 0.005))
        assert not res.boundary
        assert res.h_selected == res.h_grid[np.argmin(res.objective)]

    def test_scale_equivariance(self):
        d = curve_data(seed=7)
        s = 3.0
        grid = default_search_grid(d)
        a = select_cv_bandwidth(d, known_cf("normal", 0.005), grid)
        scaled = RegressionSample(d.base.scaled(s), d.y)
        b = select_cv_bandwidth(scaled, known_cf("normal", 0.005 * s**2), s * grid)
        assert b.h_selected == pytest.approx(s * a.h_selected, rel=1e-12)

    def test_all_degenerate(self):
        d = curve_data(n=20, seed=8, sigma2=1e-8)
        with pytest.raises(AllDegenerate):
            select_cv_bandwidth(d, unit_cf(), np.array([1e-5, 1e-4]))


class TestReferenceMISE:

    def test_bias_matches_direct_integral(self):
        crit = ReferenceMISE([1.0], [0.0], [1.0], unit_cf(), 100, 0)
        h = 0.5
        t = np.linspace(0, 60, 600001)
        kf = np.where(h * t <= 1, (1 - (h * t) ** 2) ** 3, 0.0)
        direct = np.trapezoid(np.exp(-t * t) * (1 - kf) ** 2, t) / np.pi
        assert crit.integrated_bias2(h) == pytest.approx(direct, rel=1e-6)

    def test_mixture_ft(self):
        crit = ReferenceMISE([0.3, 0.7], [-1.0, 2.0], [0.5, 1.5], unit_cf(), 100, 0)
        t = 0.8
        phi = 0.3 * np.exp(-1j * t - 0.25 * t * t) + 0.7 * np.exp(2j * t - 0.75 * t * t)
        assert crit.ft_sq(t) == pytest.approx(abs(phi) ** 2)

    def test_roughness_unit(self):
        assert l_roughness(unit_cf(), 0.7) == pytest.approx(R_K, rel=1e-9)

    def test_variance_grows_with_pairs(self):
        cf = known_cf("laplace", 0.2)
        a = ReferenceMISE([1.0], [0.0], [1.0], cf, 200, 100)
        b = ReferenceMISE([1.0], [0.0], [1.0], cf, 200, 300)
        assert b.integrated_variance(0.3) > a.integrated_variance(0.3)


class TestPlugin:

    @pytest.mark.parametrize("reference", ["normal", "mixture"])
    def test_noiseless_normal_reference(self, reference):
        rng = np.random.default_rng(10)
        x = rng.normal(size=400)
        s = ReplicatedSample.from_array(x[:, None])
        h = plugin_bandwidth_density(s, unit_cf(), sigma2_u=0.0, reference=reference)
        sd = np.std(x, ddof=1)
        r_f2 = 3.0 / (8.0 * np.sqrt(np.pi) * sd**5)
        classical = (R_K / (MU2_K**2 * r_f2 * x.size)) ** 0.2
        assert h == pytest.approx(classical, rel=0.2)

    def test_noise_widens_bandwidth(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=(200, 1))
        s = ReplicatedSample.from_array(x + rng.laplace(0.0, 0.3, (200, 2)))
        cf = known_cf("laplace", 0.18)
        clean = ReplicatedSample.from_array(x)
        assert plugin_bandwidth_density(s, cf) > plugin_bandwidth_density(clean, unit_cf(), sigma2_u=0.0)

    def test_scale_equivariant(self):
        rng = np.random.default_rng(12)
        x = rng.normal(size=(150, 1))
        s = ReplicatedSample.from_array(x + rng.laplace(0.0, 0.3, (150, 2)))
        a = plugin_bandwidth_density(s, known_cf("laplace", 0.18), sigma2_u=0.18)
        b = plugin_bandwidth_density(s.scaled(4.0), known_cf("laplace", 0.18 * 16), sigma2_u=0.18 * 16)
        assert b == pytest.approx(4.0 * a, rel=1e-4)

    def test_noise_dominates(self):
        s = ReplicatedSample.from_array(np.random.default_rng(13).normal(size=(50, 2)))
        with pytest.raises(DegenerateError):
            plugin_bandwidth_density(s, known_cf("normal", 5.0), sigma2_u=5.0)

    def test_mixture_finds_two_modes(self):
        rng = np.random.default_rng(14)
        x = np.concatenate([rng.normal(-3, 1, 300), rng.normal(2, 1, 300)])
        w, mu, v = fit_reference(x, 0.0)
        assert w.size == 2
        np.testing.assert_allclose(np.sort(mu), [-3, 2], atol=0.3)

    def test_variance_floor(self):
        x = np.random.default_rng(15).normal(size=500)
        w, mu, v = fit_reference(x, 0.8, reference="mixture")
        assert np.all(v > 0)
