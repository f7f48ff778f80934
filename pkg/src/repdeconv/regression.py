"""Errors-in-variables regression ``g_hat = a_hat / f_hat_X``."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .density import default_grid
from .error_model import unit_cf
from .errors import AllGuarded
from .numerics import deconv_spectrum, kernel_sum

GUARD_REL = 1e-3
GUARD_ABS = 1e-8


@dataclass(frozen=True, eq=False)
class RegressionEstimate:
    """Numerator, denominator and their guarded ratio on a grid.

    ``ratio`` is NaN wherever ``defined`` is False.
    """

    grid: np.ndarray
    numerator: np.ndarray
    denominator: np.ndarray
    ratio: np.ndarray
    defined: np.ndarray
    h: float
    method: str
    eps: float
    info: dict = field(default_factory=dict)

    @property
    def values(self) -> np.ndarray:
        return self.ratio


def _sums(sample, spectrum, h, grid, q):
    w = sample.base.pooled()
    scale = w.size * h
    den = kernel_sum(grid, w, h, spectrum, q) / scale
    num = kernel_sum(grid, w, h, spectrum, q, sample.pooled_y()) / scale
    return num, den


def estimate_numerator(sample, cf, h, rho=0.0, grid=None, q=None, *, known=False):
    """``a_hat(x) = (Mh)^-1 sum_jk Y_j L_hat((x - W_jk) / h)``.

    With ``known=True`` the CF is treated as the true one and the result is
    ``a_tilde``.
    """
    grid = default_grid(sample.base, h) if grid is None else np.asarray(grid, dtype=float)
    spec = deconv_spectrum(h, cf, rho, q, known=known)
    w = sample.base.pooled()
    return kernel_sum(grid, w, h, spec, q, sample.pooled_y()) / (w.size * h)


def guard_threshold(denominator):
    """Default small-denominator guard ``max(1e-3 max f, 1e-8)``."""
    return max(GUARD_REL * float(np.max(denominator)), GUARD_ABS)


def _ratio(grid, num, den, h, method, eps, info):
    if eps is None:
        eps = guard_threshold(den)
    defined = den > eps
    if not np.any(defined):
        raise AllGuarded("density estimate is below the guard on the whole grid")
    ratio = np.full(grid.shape, np.nan)
    ratio[defined] = num[defined] / den[defined]
    return RegressionEstimate(grid, num, den, ratio, defined, h, method, eps, info)


def estimate_regression(sample, cf, h, rho=0.0, grid=None, eps=None, q=None, *,
                        known=False) -> RegressionEstimate:
    """Ratio estimator of ``g`` with a small-denominator guard.

    Parameters
    ----------
    sample : RegressionSample
    cf : ErrorCF
        Estimated error CF, or the true one when ``known=True`` (giving
        ``g_tilde``).
    h : float
    rho : float
        Ridge added to the CF in the denominator of the kernel.
    grid : array_like, optional
    eps : float, optional
        Guard; points with ``f_hat_X <= eps`` are left undefined. Defaults to
        :func:`guard_threshold`.
    """
    grid = default_grid(sample.base, h) if grid is None else np.asarray(grid, dtype=float)
    spec = deconv_spectrum(h, cf, rho, q, known=known)
    num, den = _sums(sample, spec, h, grid, q)
    method = "known_cf" if known else f"estimated_cf({cf.kind})"
    return _ratio(grid, num, den, h, method, eps, {"rho": rho, "cf": cf.metadata()})


def naive_regression(sample, h, grid=None, eps=None, q=None) -> RegressionEstimate:
    """Nadaraya-Watson estimate on the contaminated covariates."""
    grid = default_grid(sample.base, h) if grid is None else np.asarray(grid, dtype=float)
    spec = deconv_spectrum(h, unit_cf(), 0.0, q, known=True)
    num, den = _sums(sample, spec, h, grid, q)
    return _ratio(grid, num, den, h, "naive", eps, {})
