"""Fourier-domain kernel machinery.

Every kernel in this package is the inverse Fourier transform of an even,
real spectrum supported on ``[-1, 1]``::

    L(u) = (1 / 2pi) * integral_{-1}^{1} cos(t u) * spectrum(t) dt

so only cosines are ever evaluated. Integrals over ``t`` use a composite
trapezoid rule; since the integrands are even we sum over ``t >= 0`` with
doubled weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import NonpositiveCF, NonpositiveDenominator

TWO_PI = 2.0 * np.pi

# Chunk size (number of output points) for outer-product evaluations.
_CHUNK = 2048


@dataclass(frozen=True)
class Quadrature:
    """Composite trapezoid rule on ``[-1, 1]`` with ``node_count`` nodes."""

    node_count: int = 1025

    def __post_init__(self):
        if self.node_count < 3 or self.node_count % 2 == 0:
            raise ValueError("node_count must be odd and >= 3")

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.linspace(-1.0, 1.0, self.node_count)

    @cached_property
    def weights(self) -> np.ndarray:
        w = np.full(self.node_count, 2.0 / (self.node_count - 1))
        w[[0, -1]] *= 0.5
        return w

    @cached_property
    def half_nodes(self) -> np.ndarray:
        """Nodes on ``[0, 1]``."""
        return self.nodes[self.node_count // 2:]

    @cached_property
    def half_weights(self) -> np.ndarray:
        """Weights for ``[0, 1]`` that integrate an even function over ``[-1, 1]``."""
        w = 2.0 * self.weights[self.node_count // 2:]
        w[0] *= 0.5
        return w

    def integrate_even(self, values) -> float:
        """Integral over ``[-1, 1]`` of an even function sampled on :attr:`half_nodes`."""
        return float(np.dot(self.half_weights, values))


DEFAULT_QUADRATURE = Quadrature()


def _quad(q):
    return DEFAULT_QUADRATURE if q is None else q


def kernel_ft(t):
    """Fourier transform of the kernel, ``(1 - t^2)^3`` on ``[-1, 1]``."""
    t = np.asarray(t, dtype=float)
    out = np.where(np.abs(t) <= 1.0, (1.0 - t * t) ** 3, 0.0)
    return out if out.ndim else float(out)


def invert_even(u, spectrum, q=None):
    """Evaluate ``(1/2pi) int cos(t u) spectrum(t) dt`` at every ``u``.

    Parameters
    ----------
    u : array_like
        Evaluation points.
    spectrum : ndarray
        Spectrum sampled on ``q.half_nodes``.
    q : Quadrature, optional
    """
    q = _quad(q)
    u = np.asarray(u, dtype=float)
    flat = u.ravel()
    coef = q.half_weights * spectrum / TWO_PI
    out = np.empty(flat.size)
    for start in range(0, flat.size, _CHUNK):
        block = flat[start:start + _CHUNK]
        out[start:start + _CHUNK] = np.cos(np.outer(block, q.half_nodes)) @ coef
    out = out.reshape(u.shape)
    return out if out.ndim else float(out)


def kernel_real(u, q=None):
    """The kernel ``K`` itself, obtained by inverting :func:`kernel_ft`."""
    q = _quad(q)
    return invert_even(u, kernel_ft(q.half_nodes), q)


def _cf_on_nodes(cf, h, q):
    return np.asarray(cf(q.half_nodes / h), dtype=float) * np.ones(q.half_nodes.size)


def deconv_spectrum(h, cf, rho=0.0, q=None, *, known=False):
    """Spectrum ``K^Ft(t) / (cf(t/h) + rho)`` on the half nodes.

    Raises
    ------
    NonpositiveCF
        ``known=True`` and the CF is nonpositive at some node.
    NonpositiveDenominator
        ``known=False`` and ``cf + rho`` is nonpositive at some node.
    """
    q = _quad(q)
    _check_bandwidth(h)
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    denom = _cf_on_nodes(cf, h, q) + rho
    if np.any(~(denom > 0)):
        if known:
            raise NonpositiveCF("known characteristic function is not positive on [-1/h, 1/h]")
        raise NonpositiveDenominator(
            "cf_hat + rho is not positive on [-1/h, 1/h]; use a ridge or tail correction"
        )
    return kernel_ft(q.half_nodes) / denom


def l2_spectrum(h, cf, q=None):
    """Spectrum ``|K^Ft(t)|^2 / |cf(t/h)|^2`` used by the CV weights."""
    q = _quad(q)
    _check_bandwidth(h)
    c = _cf_on_nodes(cf, h, q)
    if np.any(~(c != 0)) or np.any(~np.isfinite(c)):
        raise NonpositiveCF("characteristic function vanishes on [-1/h, 1/h]")
    return kernel_ft(q.half_nodes) ** 2 / c**2


def deconv_kernel_known(u, h, cf, q=None):
    """Deconvolution kernel ``L(u)`` for a known error CF."""
    return invert_even(u, deconv_spectrum(h, cf, 0.0, q, known=True), q)


def deconv_kernel_ridged(u, h, cf_hat, rho, q=None):
    """Deconvolution kernel with estimated CF and ridge, ``L_hat(u)``."""
    return invert_even(u, deconv_spectrum(h, cf_hat, rho, q), q)


def l2_kernel(x, h, cf, q=None):
    """``L_2(x) = (1/2pi) int cos(t x / h) |K^Ft(t)|^2 / |cf(t/h)|^2 dt``.

    ``x`` is a raw (unscaled) difference of observations; the division by
    ``h`` happens inside the cosine.
    """
    x = np.asarray(x, dtype=float)
    return invert_even(x / h, l2_spectrum(h, cf, q), q)


def kernel_sum(x, points, h, spectrum, q=None, weights=None):
    """``sum_p weights[p] * L((x - points[p]) / h)`` for every ``x``.

    ``L`` is the kernel with the given half-node ``spectrum``. Uses
    ``cos(a - b) = cos a cos b + sin a sin b`` so the cost is
    ``O((len(x) + len(points)) * nodes)`` instead of their product; the
    result equals the direct double sum up to rounding.
    """
    q = _quad(q)
    points = np.asarray(points, dtype=float).ravel()
    w = np.ones(points.size) if weights is None else np.asarray(weights, dtype=float).ravel()
    ts = q.half_nodes / h
    phase = np.outer(points, ts)
    cos_sum = w @ np.cos(phase)
    sin_sum = w @ np.sin(phase)
    coef = q.half_weights * spectrum / TWO_PI
    a = coef * cos_sum
    b = coef * sin_sum
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    out = np.empty(flat.size)
    for start in range(0, flat.size, _CHUNK):
        ph = np.outer(flat[start:start + _CHUNK], ts)
        out[start:start + _CHUNK] = np.cos(ph) @ a + np.sin(ph) @ b
    return out.reshape(x.shape)


def _check_bandwidth(h):
    if not (np.isfinite(h) and h > 0):
        raise ValueError(f"bandwidth must be positive and finite, got {h!r}")
