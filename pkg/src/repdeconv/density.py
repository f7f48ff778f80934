"""Deconvolution density estimators and exact finite-sample moments."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .error_model import unit_cf
from .numerics import deconv_spectrum, kernel_sum

GRID_POINTS = 512
# Deconvolution kernels have heavy oscillating tails; 3h loses visible mass.
GRID_PAD = 10.0


@dataclass(frozen=True, eq=False)
class CurveEstimate:
    """A curve estimate tabulated on a grid."""

    grid: np.ndarray
    values: np.ndarray
    h: float
    method: str
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.shape != values.shape:
            raise ValueError("grid and values differ in length")
        if grid.size > 1 and np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def integral(self) -> float:
        return float(np.trapezoid(self.values, self.grid))


def default_grid(sample, h, points=GRID_POINTS, pad=GRID_PAD):
    """Equispaced grid over ``[min W - pad*h, max W + pad*h]``."""
    w = sample.pooled()
    return np.linspace(w.min() - pad * h, w.max() + pad * h, points)


def _density_values(sample, spectrum, h, grid, q, weights=None):
    w = sample.pooled()
    return kernel_sum(grid, w, h, spectrum, q, weights) / (w.size * h)


def estimate_density(sample, cf, h, rho=0.0, grid=None, q=None) -> CurveEstimate:
    """``f_hat_X(x) = (Mh)^-1 sum_jk L_hat((x - W_jk) / h)``.

    ``cf`` is the estimated error CF (raw or tail corrected) and ``rho`` the
    ridge. Values are not clipped at zero.
    """
    grid = default_grid(sample, h) if grid is None else np.asarray(grid, dtype=float)
    spec = deconv_spectrum(h, cf, rho, q)
    values = _density_values(sample, spec, h, grid, q)
    return CurveEstimate(grid, values, h, f"estimated_cf({cf.kind})",
                         {"rho": rho, "cf": cf.metadata()})


def estimate_density_known(sample, cf_true, h, grid=None, q=None) -> CurveEstimate:
    """``f_tilde_X``: the deconvolution estimator with the true error CF."""
    grid = default_grid(sample, h) if grid is None else np.asarray(grid, dtype=float)
    spec = deconv_spectrum(h, cf_true, 0.0, q, known=True)
    values = _density_values(sample, spec, h, grid, q)
    return CurveEstimate(grid, values, h, "known_cf", {"cf": cf_true.metadata()})


def naive_density(sample, h, grid=None, q=None) -> CurveEstimate:
    """Kernel density estimate that ignores measurement error."""
    grid = default_grid(sample, h) if grid is None else np.asarray(grid, dtype=float)
    spec = deconv_spectrum(h, unit_cf(), 0.0, q, known=True)
    return CurveEstimate(grid, _density_values(sample, spec, h, grid, q), h, "naive")


def clip_and_renormalize(est: CurveEstimate) -> CurveEstimate:
    """Set negative values to zero and rescale to unit integral over the grid."""
    values = np.clip(est.values, 0.0, None)
    total = np.trapezoid(values, est.grid)
    if total > 0:
        values = values / total
    return CurveEstimate(est.grid, values, est.h, est.method, {**est.info, "clipped": True})


@dataclass(frozen=True, eq=False)
class DiagnosticMoments:
    """Exact mean and variance of the known-error estimator on a grid."""

    grid: np.ndarray
    mean: np.ndarray
    v: np.ndarray
    w: np.ndarray

    @property
    def variance(self) -> np.ndarray:
        return self.v + self.w


def theorem34_diagnostics(f_x, f_w, cf_true, M, N, h, grid, support, q=None,
                          u_max=300.0, steps_per_h=8) -> DiagnosticMoments:
    """Mean ``m_n`` and variance ``v_n + w_n`` of ``f_tilde_X`` at each grid point.

    With ``K``, ``L`` the ordinary and deconvolution kernels::

        m_n(x) = int K(u) f_X(x - hu) du
        v_n(x) = M^-1 { h^-1 int L(u)^2 f_W(x - hu) du - m_n(x)^2 }
        w_n(x) = 2N M^-2 { h^-1 int K(u)^2 f_X(x - hu) du - m_n(x)^2 }

    Parameters
    ----------
    f_x, f_w : callable
        Densities of ``X`` and ``W = X + U``.
    cf_true : callable
        Error characteristic function.
    M, N : int
        Total observation count and number of replicate pairs.
    h : float
        Bandwidth.
    grid : array_like
        Points ``x``.
    support : (float, float)
        Interval outside which ``f_x`` and ``f_w`` are negligible.
    u_max : float
        Truncation of the kernel argument; both kernels decay like ``u^-4``.
    steps_per_h : int
        Integration nodes per bandwidth; the kernels are band-limited, so a
        modest count is exact up to the smoothness of the densities.
    """
    q = numerics._quad(q)
    k_spec = numerics.kernel_ft(q.half_nodes)
    l_spec = deconv_spectrum(h, cf_true, 0.0, q, known=True)
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    lo, hi = support
    mean = np.empty(grid.size)
    ek2 = np.empty(grid.size)
    el2 = np.empty(grid.size)
    for i, x in enumerate(grid):
        y_lo = max(lo, x - h * u_max)
        y_hi = min(hi, x + h * u_max)
        count = int(np.ceil((y_hi - y_lo) / h * steps_per_h)) + 1
        y = np.linspace(y_lo, y_hi, max(count, 3))
        u = (x - y) / h
        k = numerics.invert_even(u, k_spec, q)
        ell = numerics.invert_even(u, l_spec, q)
        fx = f_x(y)
        fw = f_w(y)
        mean[i] = np.trapezoid(k * fx, y) / h
        ek2[i] = np.trapezoid(k * k * fx, y) / h**2
        el2[i] = np.trapezoid(ell * ell * fw, y) / h**2
    v = (el2 - mean**2) / M
    w = 2.0 * N * (ek2 - mean**2) / M**2
    return DiagnosticMoments(grid, mean, v, w)
