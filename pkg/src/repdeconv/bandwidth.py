"""Bandwidth selection: cross-validation for regression, a reference-density
plug-in for densities, and the theoretical rate formulas."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.linalg import toeplitz

from . import numerics
from .error_model import error_moments
from .errors import AllDegenerate, DegenerateError, NoPairs
from .numerics import kernel_ft, l2_spectrum

N_BINS = 200
BIN_QUANTILES = (0.025, 0.975)
SEARCH_POINTS = 40
SEARCH_SPAN = 8.0
DEGENERATE_TOL = 1e-6

# int K^2 = (2pi)^-1 int_{-1}^{1} (1 - t^2)^6 dt
_RK = 2048.0 / 3003.0 / (2.0 * np.pi)


@dataclass(frozen=True)
class SmoothnessParams:
    """Smoothness exponents of the error CF (``alpha``) and target (``beta``).

    ``gamma`` and ``D`` are only needed for the supersmooth rule, where the
    error CF decays like ``exp(-gamma |t|^alpha)``.
    """

    alpha: float
    beta: float
    gamma: float | None = None
    D: float | None = None

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("alpha and beta must be positive")
        if self.D is not None and self.gamma is not None:
            if not self.D > (4.0 * self.gamma) ** (1.0 / self.alpha):
                raise ValueError("supersmooth rule needs D > (4 gamma)^(1/alpha)")


def theoretical_bandwidth(n, p: SmoothnessParams, regime="ordinary") -> float:
    """Rate-optimal bandwidth with unit constant.

    ``n^(-1/(2(alpha+beta)-1))`` for ordinary-smooth errors and
    ``D (log n)^(-1/alpha)`` for supersmooth ones.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if regime == "ordinary":
        return float(n ** (-1.0 / (2.0 * (p.alpha + p.beta) - 1.0)))
    if regime == "supersmooth":
        if p.D is None:
            raise ValueError("supersmooth rule needs D")
        return float(p.D * np.log(n) ** (-1.0 / p.alpha))
    raise ValueError(f"unknown regime {regime!r}")


def rate_q_n(n, p: SmoothnessParams) -> float:
    """Pointwise MSE rate ``n^(-2(beta-1)/(2(alpha+beta)-1))``."""
    return float(n ** (-2.0 * (p.beta - 1.0) / (2.0 * (p.alpha + p.beta) - 1.0)))


# --------------------------------------------------------------------------
# Cross-validation


@dataclass(frozen=True, eq=False)
class BinnedSample:
    """Replicates snapped to equispaced bin centres, kept per group.

    ``counts[k, b]`` is the number of replicates of group ``k`` in bin ``b``.
    """

    centers: np.ndarray
    counts: np.ndarray

    @property
    def width(self) -> float:
        return float(self.centers[1] - self.centers[0])


def bin_sample(sample, bins=N_BINS, quantiles=BIN_QUANTILES) -> BinnedSample:
    """Assign every ``W_jk`` to the nearest of ``bins`` centres spanning the
    given empirical quantiles of the pooled data."""
    base = getattr(sample, "base", sample)
    w = base.pooled()
    lo, hi = np.quantile(w, quantiles)
    if not hi > lo:
        lo, hi = w.min() - 0.5, w.max() + 0.5
    centers = np.linspace(lo, hi, bins)
    idx = np.clip(np.rint((w - lo) / (centers[1] - lo)).astype(int), 0, bins - 1)
    counts = np.zeros((base.n, bins))
    np.add.at(counts, (base.group_index(), idx), 1.0)
    return BinnedSample(centers, counts)


def cv_pair_sums(sample, h, cf, binned=None, q=None) -> np.ndarray:
    """Matrix ``P[k, j] = sum_m sum_l L_2(W_km - W_jl)``.

    ``binned`` switches to the binned approximation.
    """
    q = numerics._quad(q)
    spec = l2_spectrum(h, cf, q)
    if binned is not None:
        offsets = np.arange(binned.centers.size) * binned.width
        table = numerics.invert_even(offsets / h, spec, q)
        return binned.counts @ toeplitz(table) @ binned.counts.T
    base = getattr(sample, "base", sample)
    phase = np.outer(base.pooled(), q.half_nodes / h)
    gi = base.group_index()
    cos_g = np.zeros((base.n, q.half_nodes.size))
    sin_g = np.zeros_like(cos_g)
    np.add.at(cos_g, gi, np.cos(phase))
    np.add.at(sin_g, gi, np.sin(phase))
    coef = q.half_weights * spec / numerics.TWO_PI
    return (cos_g * coef) @ cos_g.T + (sin_g * coef) @ sin_g.T


def cv_weights(sample, h, cf, binned=None, q=None) -> np.ndarray:
    """Row-normalized leave-in weights ``S_hat[k, j] = S_hat_j(X_k)``."""
    p = cv_pair_sums(sample, h, cf, binned, q)
    rows = p.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        return p / rows


def cv_objective(sample, h, cf, binned=None, q=None) -> float:
    """Cross-validation criterion for errors-in-variables regression.

    ``sum_k ((Y_k - sum_j Y_j S_hat_j(X_k)) / (1 - S_hat_k(X_k)))^2``, or
    ``inf`` when some ``1 - S_hat_k(X_k) <= 1e-6`` or a row of weights is
    not normalizable.
    """
    s = cv_weights(sample, h, cf, binned, q)
    if not np.all(np.isfinite(s)):
        return np.inf
    loo = 1.0 - np.diag(s)
    if np.any(loo <= DEGENERATE_TOL):
        return np.inf
    resid = (sample.y - s @ sample.y) / loo
    return float(resid @ resid)


@dataclass(frozen=True, eq=False)
class CVResult:
    h_selected: float
    h_grid: np.ndarray
    objective: np.ndarray
    boundary: bool


def default_search_grid(sample, alpha=2.0, beta=2.0, points=SEARCH_POINTS, span=SEARCH_SPAN):
    """Log-spaced bandwidths on ``[h_ref/span, span*h_ref]``.

    ``h_ref`` is the ordinary-smooth rate bandwidth in units of the pooled
    standard deviation of ``W``.
    """
    base = getattr(sample, "base", sample)
    w = base.pooled()
    h_ref = np.std(w, ddof=1) * theoretical_bandwidth(max(base.M, 2), SmoothnessParams(alpha, beta))
    return np.geomspace(h_ref / span, h_ref * span, points)


def select_cv_bandwidth(sample, cf, h_grid=None, binned=None, q=None) -> CVResult:
    """Minimize :func:`cv_objective` over a bandwidth grid.

    Raises
    ------
    AllDegenerate
        No bandwidth in the grid gives a finite criterion.
    """
    h_grid = default_search_grid(sample) if h_grid is None else np.asarray(h_grid, dtype=float)
    if h_grid.size == 0:
        raise ValueError("empty bandwidth grid")
    obj = np.array([cv_objective(sample, h, cf, binned, q) for h in h_grid])
    if not np.any(np.isfinite(obj)):
        raise AllDegenerate("cross-validation failed for every bandwidth")
    i = int(np.argmin(np.where(np.isfinite(obj), obj, np.inf)))
    return CVResult(float(h_grid[i]), h_grid, obj, i in (0, h_grid.size - 1))


# --------------------------------------------------------------------------
# Plug-in for densities

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(256)
_GL_S = 0.5 * (_GL_NODES + 1.0)
_GL_W = 0.5 * _GL_WEIGHTS

MAX_COMPONENTS = 4
# floor on a deconvolved component variance, relative to the fitted one
VARIANCE_FLOOR = 0.05


def l_roughness(cf, h, q=None):
    """``int L(u)^2 du`` for the deconvolution kernel at bandwidth ``h``."""
    q = numerics._quad(q)
    c = np.asarray(cf(q.half_nodes / h), dtype=float)
    return q.integrate_even(kernel_ft(q.half_nodes) ** 2 / c**2) / numerics.TWO_PI


class ReferenceMISE:
    """Exact MISE of the known-error deconvolution estimator when ``f_X`` is a
    normal mixture, with ``cf`` standing in for the error CF.

    The squared bias is ``(2pi)^-1 int |f_X^Ft(t)|^2 (1 - K^Ft(ht))^2 dt``
    and the variance is the integral of ``v_n + w_n``; both are evaluated
    in the Fourier domain. One component gives the normal reference.
    """

    def __init__(self, weights, means, variances, cf, M, N, q=None):
        self.w = np.asarray(weights, dtype=float)
        self.mu = np.asarray(means, dtype=float)
        self.var = np.asarray(variances, dtype=float)
        self.cf = cf
        self.M = M
        self.N = N
        self.q = numerics._quad(q)
        dmu = self.mu[:, None] - self.mu[None, :]
        vsum = self.var[:, None] + self.var[None, :]
        self._pair_w = np.outer(self.w, self.w)
        self._dmu = dmu
        self._vsum = vsum
        # int_0^inf |f_X^Ft|^2 dt
        self._total = float(np.sum(self._pair_w * 0.5 * np.sqrt(2.0 * np.pi / vsum)
                                   * np.exp(-dmu**2 / (2.0 * vsum))))

    def ft_sq(self, t):
        """``|f_X^Ft(t)|^2``."""
        t = np.asarray(t, dtype=float)[..., None, None]
        terms = self._pair_w * np.cos(self._dmu * t) * np.exp(-0.5 * self._vsum * t * t)
        return terms.sum(axis=(-1, -2))

    def _head(self, h):
        # integrals over [0, 1/h] of |f^Ft|^2 K and |f^Ft|^2 K^2, in s = ht
        f2 = self.ft_sq(_GL_S / h) * _GL_W / h
        k = kernel_ft(_GL_S)
        return float(f2 @ k), float(f2 @ (k * k))

    def integrated_bias2(self, h):
        fk, fk2 = self._head(h)
        return (self._total - 2.0 * fk + fk2) / np.pi

    def integrated_variance(self, h):
        m2 = self._head(h)[1] / np.pi
        rl = l_roughness(self.cf, h, self.q)
        return (rl / h - m2) / self.M + 2.0 * self.N * (_RK / h - m2) / self.M**2

    def __call__(self, h):
        return self.integrated_bias2(h) + self.integrated_variance(h)


def fit_reference(w, sigma2_u, reference="mixture", max_components=MAX_COMPONENTS, seed=0):
    """Normal (mixture) reference for ``f_X`` from contaminated data.

    A normal mixture is fitted to ``W`` (component count by BIC, at most
    ``max_components``) and ``sigma2_u`` is removed from each component
    variance, floored at ``VARIANCE_FLOOR`` times the fitted value.
    ``reference="normal"`` forces a single component, which is the moment
    fit ``N(mean W, var W - sigma2_u)``.

    Returns
    -------
    weights, means, variances : ndarray
    """
    w = np.asarray(w, dtype=float)
    loc = w.mean()
    scale = np.std(w, ddof=1)
    sx2 = scale**2 - sigma2_u
    if not sx2 > 0:
        raise DegenerateError("estimated signal variance is not positive")
    if reference == "normal":
        return np.array([1.0]), np.array([loc]), np.array([sx2])
    if reference != "mixture":
        raise ValueError(f"unknown reference {reference!r}")
    from sklearn.mixture import GaussianMixture

    z = ((w - loc) / scale)[:, None]
    best = None
    for k in range(1, min(max_components, max(1, w.size // 10)) + 1):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            gm = GaussianMixture(k, random_state=seed).fit(z)
        bic = gm.bic(z)
        if best is None or bic < best[0]:
            best = (bic, gm)
    gm = best[1]
    means = loc + scale * gm.means_.ravel()
    variances = scale**2 * gm.covariances_.ravel()
    variances = np.maximum(variances - sigma2_u, VARIANCE_FLOOR * variances)
    return gm.weights_.copy(), means, variances


def _minimize_log(fun, lo, hi, points):
    log_h = np.linspace(np.log(lo), np.log(hi), points)
    vals = np.array([fun(np.exp(v)) for v in log_h])
    vals = np.where(np.isfinite(vals), vals, np.inf)
    i = int(np.argmin(vals))
    a = log_h[max(i - 1, 0)]
    b = log_h[min(i + 1, points - 1)]
    res = optimize.minimize_scalar(lambda v: fun(np.exp(v)), bounds=(a, b),
                                   method="bounded", options={"xatol": 1e-6})
    return float(np.exp(res.x if res.fun <= vals[i] else log_h[i]))


def plugin_bandwidth_density(sample, cf, sigma2_u=None, q=None, reference="mixture",
                             bounds=(0.02, 2.0), points=41):
    """Reference-density plug-in bandwidth for deconvolution density estimation.

    Minimizes the exact MISE of the deconvolution estimator when ``f_X`` is
    replaced by a normal (``reference="normal"``) or BIC-selected normal
    mixture (``reference="mixture"``) fitted to the data.

    Parameters
    ----------
    sample : ReplicatedSample
    cf : ErrorCF
        Error CF used in the variance term (estimated or known).
    sigma2_u : float, optional
        Error variance; estimated from replicate differences when omitted
        (zero if there are no pairs).
    bounds : (float, float)
        Search interval as multiples of the pooled standard deviation.

    Raises
    ------
    DegenerateError
        ``var(W) - sigma2_u <= 0``.
    """
    q = numerics._quad(q)
    w = sample.pooled()
    if sigma2_u is None:
        try:
            sigma2_u = error_moments(sample).sigma2
        except NoPairs:
            sigma2_u = 0.0
    weights, means, variances = fit_reference(w, sigma2_u, reference)
    crit = ReferenceMISE(weights, means, variances, cf, sample.M, sample.N, q)
    sd_w = np.std(w, ddof=1)
    return _minimize_log(crit, bounds[0] * sd_w, bounds[1] * sd_w, points)
