"""Tests for kernel transforms and Fourier inversion."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repdeconv import numerics
from repdeconv.error_model import ErrorCF, known_cf, unit_cf
from repdeconv.errors import NonpositiveCF, NonpositiveDenominator
from repdeconv.numerics import (
    Quadrature,
    deconv_kernel_known,
    deconv_kernel_ridged,
    kernel_ft,
    kernel_real,
    kernel_sum,
    l2_kernel,
)

# Oracles computed with mpmath adaptive quadrature (30 digits).
L_LAPLACE_S1_H1_U0 = 0.153597151428368832
L_RIDGED_TOY = 0.164946968895098410
L2_LAPLACE_S1_H04_X0 = 0.166237017469617388
# (1/2pi) int_{-1}^{1} (1-t^2)^6 dt = (1/2pi)(2048/3003)
L2_UNIT_X0 = 2048.0 / 3003.0 / (2.0 * np.pi)


def toy_cf():
    # a smooth positive stand-in for an estimated CF
    return ErrorCF("raw_estimate", lambda t: np.exp(-t * t / 4.0) * (1.0 + 0.1 * np.cos(t)) / 1.1)


class TestQuadrature:

    def test_rejects_even_node_count(self):
        with pytest.raises(ValueError):
            Quadrature(1024)

    def test_weights_integrate_polynomial(self):
        q = Quadrature()
        np.testing.assert_allclose(q.integrate_even(kernel_ft(q.half_nodes)), 32.0 / 35.0, rtol=1e-6)

    def test_node_count_convergence(self):
        u = np.linspace(-5, 5, 11)
        a = kernel_real(u, Quadrature(1025))
        b = kernel_real(u, Quadrature(2049))
        assert np.max(np.abs(a - b)) < 1e-10


class TestKernelFt:

    @pytest.mark.parametrize("t, expected", [(0.0, 1.0), (1.5, 0.0), (0.5, 0.421875), (-0.5, 0.421875)])
    def test_values(self, t, expected):
        assert kernel_ft(t) == pytest.approx(expected, abs=1e-15)


class TestKernelReal:

    def test_value_at_zero(self):
        assert kernel_real(0.0) == pytest.approx(16.0 / (35.0 * np.pi), rel=1e-8)

    @given(st.floats(-50, 50))
    def test_even(self, u):
        assert kernel_real(u) == pytest.approx(kernel_real(-u), abs=1e-14)

    def test_integrates_to_one(self):
        # K decays like u^-4, so the tails beyond 400 contribute < 1e-8
        u = np.linspace(-400, 400, 160001)
        assert np.trapezoid(kernel_real(u), u) == pytest.approx(1.0, abs=1e-6)


class TestDeconvolutionKernels:

    def test_unit_cf_reduces_to_k(self):
        u = np.linspace(-6, 6, 25)
        np.testing.assert_allclose(deconv_kernel_known(u, 0.7, unit_cf()), kernel_real(u), atol=1e-15)

    def test_laplace_oracle(self):
        assert deconv_kernel_known(0.0, 1.0, known_cf("laplace", 1.0)) == pytest.approx(
            L_LAPLACE_S1_H1_U0, rel=1e-9)

    @given(st.floats(-30, 30), st.floats(0.05, 3.0))
    @settings(max_examples=30)
    def test_known_even(self, u, h):
        cf = known_cf("laplace", 0.5)
        assert deconv_kernel_known(u, h, cf) == pytest.approx(deconv_kernel_known(-u, h, cf), abs=1e-12)

    def test_ridged_equals_known_without_ridge(self):
        cf = known_cf("normal", 0.3)
        u = np.linspace(-4, 4, 9)
        np.testing.assert_array_equal(deconv_kernel_ridged(u, 0.5, cf, 0.0), deconv_kernel_known(u, 0.5, cf))

    def test_ridged_unit_cf(self):
        u = np.linspace(-4, 4, 9)
        np.testing.assert_allclose(deconv_kernel_ridged(u, 0.5, unit_cf(), 0.0), kernel_real(u), atol=1e-15)

    def test_ridged_toy_oracle(self):
        assert deconv_kernel_ridged(0.3, 0.5, toy_cf(), 0.01) == pytest.approx(L_RIDGED_TOY, rel=1e-9)

    def test_nonpositive_known_cf(self):
        bad = ErrorCF("closed_form", lambda t: np.cos(t))
        with pytest.raises(NonpositiveCF):
            deconv_kernel_known(0.0, 0.5, bad)

    def test_nonpositive_estimated_cf(self):
        bad = ErrorCF("raw_estimate", lambda t: np.where(np.abs(t) > 1.0, 0.0, 1.0))
        with pytest.raises(NonpositiveDenominator):
            deconv_kernel_ridged(0.0, 0.5, bad, 0.0)
        # a ridge repairs it
        assert np.isfinite(deconv_kernel_ridged(0.0, 0.5, bad, 0.1))

    def test_negative_ridge_rejected(self):
        with pytest.raises(ValueError):
            deconv_kernel_ridged(0.0, 0.5, unit_cf(), -0.1)

    @pytest.mark.parametrize("h", [0.0, -1.0, np.inf, np.nan])
    def test_bad_bandwidth(self, h):
        with pytest.raises(ValueError):
            deconv_kernel_known(0.0, h, unit_cf())


class TestL2Kernel:

    def test_unit_cf_at_zero(self):
        assert l2_kernel(0.0, 1.0, unit_cf()) == pytest.approx(L2_UNIT_X0, rel=1e-9)

    def test_laplace_oracle(self):
        assert l2_kernel(0.0, 0.4, known_cf("laplace", 1.0)) == pytest.approx(L2_LAPLACE_S1_H04_X0, rel=1e-9)

    @given(st.floats(-20, 20))
    @settings(max_examples=30)
    def test_even(self, x):
        cf = known_cf("laplace", 1.0)
        assert l2_kernel(x, 0.4, cf) == pytest.approx(l2_kernel(-x, 0.4, cf), abs=1e-12)

    def test_scales_argument_by_h(self):
        # with cf = 1, L_2 depends on x only through x / h
        assert l2_kernel(0.6, 0.3, unit_cf()) == pytest.approx(l2_kernel(2.0, 1.0, unit_cf()), abs=1e-14)


class TestKernelSum:

    @given(st.lists(st.floats(-5, 5), min_size=1, max_size=20), st.floats(0.1, 2.0))
    @settings(max_examples=30)
    def test_matches_direct_sum(self, points, h):
        q = numerics.DEFAULT_QUADRATURE
        spec = numerics.deconv_spectrum(h, known_cf("laplace", 0.4), 0.0, q, known=True)
        x = np.linspace(-6, 6, 13)
        direct = numerics.invert_even((x[:, None] - np.array(points)[None, :]) / h, spec, q).sum(axis=1)
        np.testing.assert_allclose(kernel_sum(x, points, h, spec, q), direct, atol=1e-12)

    def test_weights(self):
        q = numerics.DEFAULT_QUADRATURE
        spec = kernel_ft(q.half_nodes)
        x = np.linspace(-2, 2, 5)
        a = kernel_sum(x, [0.0, 1.0], 0.5, spec, q, weights=[2.0, -1.0])
        b = 2 * kernel_real(x / 0.5) - kernel_real((x - 1.0) / 0.5)
        np.testing.assert_allclose(a, b, atol=1e-13)
