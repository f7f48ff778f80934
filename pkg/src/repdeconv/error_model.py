"""Error characteristic functions: closed forms, replicate-based estimates and
the ridge-free tail correction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateError, NoPairs
from .samples import ReplicatedSample

# Largest shape parameter accepted from the moment fit before falling back.
B_MAX = 50.0
# Rise over the running minimum that ends the monotone region of the raw CF.
UPTICK_TOL = 0.01

_CHUNK = 256


class ErrorCF:
    """An even, real characteristic function evaluable at any ``t``.

    Parameters
    ----------
    kind : str
        One of ``"closed_form"``, ``"unit"``, ``"raw_estimate"``,
        ``"tail_corrected"``.
    func : callable
        Vectorized map ``t -> cf(t)``.
    **params
        Descriptive parameters kept for metadata.
    """

    def __init__(self, kind, func, **params):
        self.kind = kind
        self._func = func
        self.params = params

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.asarray(self._func(t), dtype=float)
        if out.shape != t.shape:
            out = out.reshape(t.shape) if out.size == t.size else np.broadcast_to(out, t.shape).copy()
        return out if out.ndim else float(out)

    def metadata(self) -> dict:
        meta = {"kind": self.kind}
        for key, value in self.params.items():
            if isinstance(value, np.ndarray):
                continue
            meta[key] = float(value) if isinstance(value, (np.floating, np.integer)) else value
        return meta

    def __repr__(self):
        return f"ErrorCF({self.kind!r}, {self.metadata()!r})"


@dataclass(frozen=True)
class ErrorMoments:
    """Second and fourth moment estimates of the measurement error."""

    sigma2: float
    mu4: float


def known_cf(family, sigma2):
    """Closed-form CF of a centred Laplace or normal error with variance ``sigma2``."""
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    if family == "laplace":
        return ErrorCF("closed_form", lambda t: 1.0 / (1.0 + 0.5 * sigma2 * t * t),
                       family=family, sigma2=sigma2)
    if family == "normal":
        return ErrorCF("closed_form", lambda t: np.exp(-0.5 * sigma2 * t * t),
                       family=family, sigma2=sigma2)
    raise ValueError(f"unknown error family {family!r}")


def unit_cf():
    """The CF of a point mass at zero (no measurement error)."""
    return ErrorCF("unit", lambda t: np.ones_like(t))


def pair_differences(sample: ReplicatedSample) -> np.ndarray:
    """All within-group differences ``W_jk1 - W_jk2`` with ``k1 < k2``.

    Groups with a single replicate contribute nothing.
    """
    sizes = sample.sizes
    if sample.N == 0:
        raise NoPairs("no group has two or more replicates")
    if np.all(sizes == sizes[0]):
        block = np.stack(sample.groups)
        k1, k2 = np.triu_indices(sizes[0], k=1)
        return (block[:, k1] - block[:, k2]).ravel()
    out = []
    for g in sample.groups:
        if g.size >= 2:
            k1, k2 = np.triu_indices(g.size, k=1)
            out.append(g[k1] - g[k2])
    return np.concatenate(out)


def _mean_cos(diffs, t):
    t = np.asarray(t, dtype=float)
    flat = t.ravel()
    out = np.empty(flat.size)
    for start in range(0, flat.size, _CHUNK):
        out[start:start + _CHUNK] = np.cos(np.outer(flat[start:start + _CHUNK], diffs)).mean(axis=1)
    return out.reshape(t.shape)


def _raw_from_diffs(diffs, t):
    return np.sqrt(np.abs(_mean_cos(diffs, t)))


def estimate_error_cf(sample, t):
    """``|N^-1 sum cos(t (W_jk1 - W_jk2))|^(1/2)`` evaluated at ``t``."""
    out = _raw_from_diffs(pair_differences(sample), t)
    return out if out.ndim else float(out)


def estimated_cf(sample) -> ErrorCF:
    """The raw replicate-based CF estimate as an :class:`ErrorCF`."""
    diffs = pair_differences(sample)
    return ErrorCF("raw_estimate", lambda t: _raw_from_diffs(diffs, t), pairs=diffs, n_pairs=diffs.size)


def error_moments(sample) -> ErrorMoments:
    """Error variance and fourth moment from replicate differences.

    For independent symmetric errors ``D = U - U'`` satisfies
    ``E D^2 = 2 sigma^2`` and ``E D^4 = 2 mu4 + 6 sigma^4``.
    """
    d = pair_differences(sample)
    d2 = d * d
    sigma2 = float(d2.mean() / 2.0)
    mu4 = float(((d2 * d2).mean() - 6.0 * sigma2**2) / 2.0)
    return ErrorMoments(sigma2, mu4)


def moment_match(m: ErrorMoments, b_max=B_MAX):
    """Fit ``(1 + A t^2)^(-B)`` to the error moments.

    Matches ``mu2 = 2AB`` and ``mu4 = 12 B (B+1) A^2``. Falls back to the
    Laplace fit ``(sigma2 / 2, 1)`` when the excess kurtosis is not
    positive or the fitted ``B`` is outside ``(0, b_max]``.

    Returns
    -------
    (A_U, B_U) : tuple of float
    """
    if not m.sigma2 > 0:
        raise DegenerateError("error variance estimate is zero; data look noiseless")
    s2 = m.sigma2
    fallback = (s2 / 2.0, 1.0)
    excess = m.mu4 - 3.0 * s2 * s2
    if not excess > 0:
        return fallback
    b = 3.0 * s2 * s2 / excess
    if not (np.isfinite(b) and 0.0 < b <= b_max):
        return fallback
    return s2 / (2.0 * b), b


def find_monotone_limit(t_pos, values, tol=UPTICK_TOL):
    """Right end of the region where ``values`` is nonincreasing.

    ``t_pos`` is increasing and strictly positive. Returns the first ``t`` at
    which ``values`` exceeds its running minimum by more than ``tol``, or
    the last point that is still positive, or ``t_pos[-1]`` when neither
    happens.
    """
    running = values[0]
    if not values[0] > 0:
        raise DegenerateError("raw CF estimate vanishes at the first frequency")
    for i in range(1, len(t_pos)):
        v = values[i]
        if not v > 0:
            return t_pos[i - 1]
        if v > running + tol:
            return t_pos[i]
        running = min(running, v)
    return t_pos[-1]


def tail_correct(sample, t_grid, tol=UPTICK_TOL, b_max=B_MAX) -> ErrorCF:
    """Splice the raw estimate with a parametric tail.

    The raw estimate is kept on ``[-t_A, t_A]``, the largest symmetric
    interval (scanned on the nonnegative part of ``t_grid``) on which it is
    nonincreasing up to ``tol``; outside, ``(1 + A_U t^2)^(-B_U)`` with
    ``A_U, B_U`` from :func:`moment_match` is used.
    """
    diffs = pair_differences(sample)
    a_u, b_u = moment_match(error_moments(sample), b_max)
    t_grid = np.asarray(t_grid, dtype=float)
    t_pos = np.unique(np.abs(t_grid[t_grid != 0]))
    if t_pos.size == 0:
        raise ValueError("t_grid needs at least one nonzero point")
    t_a = float(find_monotone_limit(t_pos, _raw_from_diffs(diffs, t_pos), tol))

    def evaluate(t):
        t = np.atleast_1d(t)
        out = (1.0 + a_u * t * t) ** (-b_u)
        inside = np.abs(t) <= t_a
        if np.any(inside):
            out[inside] = _raw_from_diffs(diffs, t[inside])
        return out

    return ErrorCF("tail_corrected", evaluate, A_U=a_u, B_U=b_u, t_A=t_a, pairs=diffs,
                   n_pairs=diffs.size)
