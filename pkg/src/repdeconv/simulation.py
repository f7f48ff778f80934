"""Simulation designs, data generators, ISE and the Monte Carlo driver."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special, stats

from . import numerics
from .bandwidth import bin_sample, default_search_grid, plugin_bandwidth_density, select_cv_bandwidth
from .density import estimate_density, estimate_density_known
from .error_model import known_cf, tail_correct, unit_cf
from .errors import DegenerateError, DeconvolutionError, DomainMismatch, UnknownTarget
from .regression import estimate_regression
from .samples import RegressionSample, ReplicatedSample

# ---------------------------------------------------------------------------
# Target densities


@dataclass(frozen=True)
class NormalMixture:
    """Finite mixture of normals; also exposes its convolution with an error."""

    weights: tuple
    means: tuple
    sds: tuple

    @property
    def mean(self) -> float:
        return float(np.dot(self.weights, self.means))

    @property
    def var(self) -> float:
        w, m, s = map(np.asarray, (self.weights, self.means, self.sds))
        return float(np.dot(w, s**2 + m**2) - self.mean**2)

    @property
    def support(self):
        lo = min(m - 12 * s for m, s in zip(self.means, self.sds))
        hi = max(m + 12 * s for m, s in zip(self.means, self.sds))
        return lo, hi

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for w, m, s in zip(self.weights, self.means, self.sds):
            out += w * stats.norm.pdf(x, m, s)
        return out

    def sample(self, rng, count):
        comp = rng.choice(len(self.weights), size=count, p=np.asarray(self.weights) / sum(self.weights))
        z = rng.standard_normal(count)
        return np.asarray(self.means)[comp] + np.asarray(self.sds)[comp] * z

    def convolved_pdf(self, family, sigma2):
        """Density of ``X + U`` for a centred Laplace or normal ``U``."""
        if sigma2 == 0:
            return self.pdf
        if family == "normal":
            return NormalMixture(self.weights, self.means,
                                 tuple(math.sqrt(s * s + sigma2) for s in self.sds)).pdf
        if family != "laplace":
            raise ValueError(f"unknown error family {family!r}")
        b = math.sqrt(sigma2 / 2.0)

        def pdf(x):
            x = np.asarray(x, dtype=float)
            out = np.zeros_like(x)
            for w, m, s in zip(self.weights, self.means, self.sds):
                out += w * normal_laplace_pdf(x - m, s, b)
            return out

        return pdf


def normal_laplace_pdf(z, s, b):
    """Density of ``N(0, s^2) + Laplace(0, b)`` at ``z``."""
    z = np.asarray(z, dtype=float)
    r = s / b
    c1 = (r - z / s) / math.sqrt(2.0)
    c2 = (r + z / s) / math.sqrt(2.0)
    gauss = np.exp(-0.5 * (z / s) ** 2)

    def term(c, sign):
        # exp(s^2/2b^2 + sign*z/b) * erfc(c), written stably
        with np.errstate(over="ignore", invalid="ignore"):
            direct = np.exp(0.5 * r * r + sign * z / b) * special.erfc(c)
        return np.where(c >= 0, gauss * special.erfcx(np.maximum(c, 0)), direct)

    return (term(c1, -1.0) + term(c2, 1.0)) / (4.0 * b)


@dataclass(frozen=True)
class ChiSquareTarget:
    df: int = 3

    @property
    def mean(self) -> float:
        return float(self.df)

    @property
    def var(self) -> float:
        return 2.0 * self.df

    @property
    def support(self):
        return -12.0, 60.0

    def pdf(self, x):
        return stats.chi2.pdf(np.asarray(x, dtype=float), self.df)

    def sample(self, rng, count):
        return rng.chisquare(self.df, size=count)

    def convolved_pdf(self, family, sigma2):
        if sigma2 == 0:
            return self.pdf
        err = error_pdf(family, sigma2)

        def pdf(x):
            x = np.atleast_1d(np.asarray(x, dtype=float))
            return np.array([integrate.quad(lambda v: self.pdf(v) * err(xi - v), 0, np.inf,
                                            limit=200)[0] for xi in x])

        return pdf


def _smooth_comb():
    ls = range(6)
    return NormalMixture(
        tuple(2.0 ** (5 - l) / 63.0 for l in ls),
        tuple((65.0 - 96.0 * 0.5**l) / 21.0 for l in ls),
        tuple((32.0 / 63.0) / 2.0**l for l in ls),
    )


DENSITY_TARGETS = {
    "i": NormalMixture((0.5, 0.5), (-3.0, 2.0), (1.0, 1.0)),
    "ii": ChiSquareTarget(3),
    "iii": _smooth_comb(),
    "iv": NormalMixture((1.0,), (0.0,), (1.0,)),
}


def get_target(target_id):
    try:
        return DENSITY_TARGETS[target_id]
    except KeyError:
        raise UnknownTarget(f"unknown density target {target_id!r}") from None


def sample_target_density(target_id, count, rng):
    """I.i.d. draws from density (i), (ii), (iii) or (iv)."""
    if count < 1:
        raise ValueError("count must be positive")
    return get_target(target_id).sample(rng, count)


def error_pdf(family, sigma2):
    if family == "laplace":
        b = math.sqrt(sigma2 / 2.0)
        return lambda x: np.exp(-np.abs(x) / b) / (2.0 * b)
    if family == "normal":
        return lambda x: stats.norm.pdf(x, 0.0, math.sqrt(sigma2))
    raise ValueError(f"unknown error family {family!r}")


def sample_errors(family, sigma2_u, shape, rng):
    """Centred Laplace or normal errors with variance ``sigma2_u``."""
    if sigma2_u < 0:
        raise ValueError("sigma2_u must be nonnegative")
    if sigma2_u == 0:
        return np.zeros(shape)
    if family == "laplace":
        return rng.laplace(0.0, math.sqrt(sigma2_u / 2.0), size=shape)
    if family == "normal":
        return rng.normal(0.0, math.sqrt(sigma2_u), size=shape)
    raise ValueError(f"unknown error family {family!r}")


# ---------------------------------------------------------------------------
# Regression designs

# sd making 0 and 1 the 2.5% and 97.5% quantiles of N(0.5, sd^2)
NORMAL_X_SD = 0.5 / stats.norm.ppf(0.975)


def g_curve(curve_id):
    if curve_id == "i":
        return lambda x: x**2 * (1.0 - x) ** 2
    if curve_id == "ii":
        return lambda x: 3.0 * x + 20.0 / math.sqrt(2.0 * math.pi) * np.exp(-100.0 * (x - 0.5) ** 2)
    if curve_id == "iii":
        return lambda x: 0.45 * np.sin(2.0 * math.pi * x) + 0.5
    raise UnknownTarget(f"unknown regression curve {curve_id!r}")


def covariate(x_dist):
    if x_dist == "uniform":
        return stats.uniform(0.0, 1.0)
    if x_dist == "normal":
        return stats.norm(0.5, NORMAL_X_SD)
    raise ValueError(f"unknown covariate distribution {x_dist!r}")


def signal_variance(curve_id, x_dist="uniform"):
    """``sigma^2(g) = int (g - gbar)^2 f_X``."""
    g = g_curve(curve_id)
    dist = covariate(x_dist)
    lo, hi = (0.0, 1.0) if x_dist == "uniform" else (0.5 - 12 * NORMAL_X_SD, 0.5 + 12 * NORMAL_X_SD)
    opts = dict(epsabs=1e-14, epsrel=1e-12, limit=200, points=[0.5])
    gbar = integrate.quad(lambda x: g(x) * dist.pdf(x), lo, hi, **opts)[0]
    return integrate.quad(lambda x: (g(x) - gbar) ** 2 * dist.pdf(x), lo, hi, **opts)[0]


# ---------------------------------------------------------------------------
# Designs

DEFAULT_NSR = {"i": 0.25, "ii": 0.25, "iii": 0.10, "iv": 0.25}
REGRESSION_NSR_U = 0.10
PAPER_NSR = {0.10, 0.25}


@dataclass(frozen=True)
class SimDesign:
    """One simulation configuration.

    ``kind`` is ``"density"`` or ``"regression"``; ``target`` names the
    density (i)-(iv) or regression curve (i)-(iii). ``method`` picks the
    estimated-CF estimator or its known-CF counterpart.
    """

    kind: str
    target: str
    error_family: str = "laplace"
    n: int = 100
    replicates: int = 2
    reps: int = 500
    seed: int = 0
    nsr_u: float | None = None
    nsr_v: float = 0.10
    x_dist: str = "uniform"
    method: str = "estimated"
    allow_nonpaper_nsr: bool = False

    def __post_init__(self):
        if self.kind not in ("density", "regression"):
            raise ValueError(f"unknown design kind {self.kind!r}")
        if self.kind == "density":
            get_target(self.target)
        else:
            g_curve(self.target)
        if self.reps < 1 or self.n < 1 or self.replicates < 1:
            raise ValueError("reps, n and replicates must be positive")
        if self.method not in ("estimated", "known"):
            raise ValueError(f"unknown method {self.method!r}")
        if not self.allow_nonpaper_nsr:
            for v in (self.nsr_u, self.nsr_v if self.kind == "regression" else None):
                if v is not None and v not in PAPER_NSR:
                    raise ValueError("noise-to-signal ratios other than 0.10/0.25 need allow_nonpaper_nsr")

    @property
    def noise_ratio(self) -> float:
        if self.nsr_u is not None:
            return self.nsr_u
        return DEFAULT_NSR[self.target] if self.kind == "density" else REGRESSION_NSR_U

    @property
    def sigma2_x(self) -> float:
        if self.kind == "density":
            return get_target(self.target).var
        return float(covariate(self.x_dist).var())

    @property
    def sigma2_u(self) -> float:
        return self.noise_ratio * self.sigma2_x

    @property
    def M(self) -> int:
        return self.n * self.replicates


def rep_rng(seed, rep):
    """Independent generator for replication ``rep``; independent of scheduling."""
    return np.random.default_rng([int(seed), int(rep)])


def make_density_dataset(design: SimDesign, rng) -> ReplicatedSample:
    x = sample_target_density(design.target, design.n, rng)
    u = sample_errors(design.error_family, design.sigma2_u, (design.n, design.replicates), rng)
    return ReplicatedSample.from_array(x[:, None] + u)


def make_regression_dataset(design: SimDesign, rng) -> RegressionSample:
    g = g_curve(design.target)
    if design.x_dist == "uniform":
        x = rng.uniform(0.0, 1.0, design.n)
    else:
        x = rng.normal(0.5, NORMAL_X_SD, design.n)
    u = sample_errors(design.error_family, design.sigma2_u, (design.n, design.replicates), rng)
    if design.target == "iii":
        y = (rng.uniform(size=design.n) < g(x)).astype(float)
    else:
        sigma2_v = design.nsr_v * signal_variance(design.target, design.x_dist)
        y = g(x) + rng.normal(0.0, math.sqrt(sigma2_v), design.n)
    return RegressionSample(ReplicatedSample.from_array(x[:, None] + u), y)


# ---------------------------------------------------------------------------
# ISE


def ise(est, truth, domain="grid", atol=1e-9) -> float:
    """Integrated squared error by the trapezoid rule.

    Parameters
    ----------
    est : CurveEstimate or RegressionEstimate
    truth : callable
    domain : "grid" or (float, float)
        ``"grid"`` integrates over the whole estimate grid.

    Undefined (guarded) points are dropped together with the adjoining
    subintervals.
    """
    grid = np.asarray(est.grid, dtype=float)
    values = np.asarray(est.values, dtype=float)
    defined = np.asarray(getattr(est, "defined", np.isfinite(values)), dtype=bool)
    if isinstance(domain, str):
        if domain != "grid":
            raise DomainMismatch(f"unknown domain {domain!r}")
        inside = np.ones(grid.size, dtype=bool)
    else:
        a, b = domain
        if grid[0] > a + atol or grid[-1] < b - atol:
            raise DomainMismatch(f"grid [{grid[0]}, {grid[-1]}] does not cover [{a}, {b}]")
        inside = (grid >= a - atol) & (grid <= b + atol)
    x = grid[inside]
    ok = defined[inside]
    sq = np.where(ok, (np.where(ok, values[inside], 0.0) - truth(x)) ** 2, 0.0)
    seg = ok[:-1] & ok[1:]
    return float(np.sum(seg * 0.5 * (sq[:-1] + sq[1:]) * np.diff(x)))


# ---------------------------------------------------------------------------
# Monte Carlo

REGRESSION_GRID = np.linspace(0.0, 1.0, 201)
PLUGIN_BOUNDS = (0.02, 2.0)
MAX_FAILURE_RATE = 0.01


@dataclass
class RepResult:
    rep: int
    ise: float
    h: float
    grid: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    boundary: bool = False
    error: str | None = None
    integral: float = float("nan")


def _error_cf(design, sample, h_lo, q):
    if design.method == "known":
        return known_cf(design.error_family, design.sigma2_u) if design.sigma2_u > 0 else unit_cf()
    try:
        return tail_correct(getattr(sample, "base", sample), q.nodes / h_lo)
    except DegenerateError:
        return unit_cf()


def run_density_rep(design, sample, q=None):
    q = numerics._quad(q)
    h_lo = PLUGIN_BOUNDS[0] * np.std(sample.pooled(), ddof=1)
    cf = _error_cf(design, sample, h_lo, q)
    sigma2_u = design.sigma2_u if design.method == "known" else None
    h = plugin_bandwidth_density(sample, cf, sigma2_u=sigma2_u, q=q, bounds=PLUGIN_BOUNDS)
    if design.method == "known":
        est = estimate_density_known(sample, cf, h, q=q)
    else:
        est = estimate_density(sample, cf, h, q=q)
    return est, get_target(design.target).pdf


def run_regression_rep(design, sample, q=None, grid=REGRESSION_GRID):
    q = numerics._quad(q)
    h_grid = default_search_grid(sample)
    cf = _error_cf(design, sample, h_grid[0], q)
    cv = select_cv_bandwidth(sample, cf, h_grid, binned=bin_sample(sample), q=q)
    est = estimate_regression(sample, cf, cv.h_selected, grid=grid, q=q,
                              known=design.method == "known")
    return est, g_curve(design.target), cv


def run_rep(design: SimDesign, rep: int) -> RepResult:
    """Generate, smooth and score one replication."""
    rng = rep_rng(design.seed, rep)
    try:
        if design.kind == "density":
            sample = make_density_dataset(design, rng)
            est, truth = run_density_rep(design, sample)
            return RepResult(rep, ise(est, truth), est.h, est.grid, est.values, integral=est.integral())
        sample = make_regression_dataset(design, rng)
        est, truth, cv = run_regression_rep(design, sample)
        return RepResult(rep, ise(est, truth, (0.0, 1.0)), est.h, est.grid, est.values, cv.boundary)
    except DeconvolutionError as exc:
        return RepResult(rep, np.nan, np.nan, np.empty(0), np.empty(0), error=f"{type(exc).__name__}: {exc}")


@dataclass
class IseSummary:
    """Per-replication ISEs with their median, IQR and quartile replications."""

    design: SimDesign
    ise: np.ndarray
    h: np.ndarray
    median: float
    iqr: float
    quartile_reps: tuple
    quartile_curves: dict = field(repr=False, default_factory=dict)
    boundary: np.ndarray = field(repr=False, default=None)
    failures: dict = field(default_factory=dict)
    integrals: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "design": {k: v for k, v in self.design.__dict__.items()},
            "median": self.median,
            "iqr": self.iqr,
            "quartile_reps": list(self.quartile_reps),
            "failures": {str(k): v for k, v in self.failures.items()},
            "ise": [None if not np.isfinite(v) else float(v) for v in self.ise],
            "h": [None if not np.isfinite(v) else float(v) for v in self.h],
        }


def summarize(design, results) -> IseSummary:
    results = sorted(results, key=lambda r: r.rep)
    values = np.array([r.ise for r in results])
    hs = np.array([r.h for r in results])
    failures = {r.rep: r.error for r in results if r.error is not None}
    if len(failures) > MAX_FAILURE_RATE * len(results):
        first = next(iter(failures.values()))
        raise DeconvolutionError(f"{len(failures)} of {len(results)} replications failed; first: {first}")
    ok = np.isfinite(values)
    q1, q2, q3 = np.quantile(values[ok], [0.25, 0.5, 0.75])
    picks = []
    for target in (q1, q2, q3):
        dist = np.where(ok, np.abs(values - target), np.inf)
        picks.append(int(np.argmin(dist)))
    curves = {}
    for label, i in zip(("q1", "q2", "q3"), picks):
        curves[label] = (results[i].grid, results[i].values)
    return IseSummary(
        design, values, hs, float(q2), float(q3 - q1), tuple(results[i].rep for i in picks),
        curves, np.array([r.boundary for r in results]), failures,
        np.array([r.integral for r in results]),
    )


def _run_chunk(args):
    design, reps = args
    return [run_rep(design, r) for r in reps]


def monte_carlo(design: SimDesign, workers=1) -> IseSummary:
    """Run ``design.reps`` independent replications and summarize their ISEs.

    Results do not depend on ``workers``: each replication draws from its own
    seeded stream and the output is ordered by replication index.
    """
    reps = list(range(design.reps))
    if workers <= 1:
        results = [run_rep(design, r) for r in reps]
    else:
        chunks = [(design, reps[i::workers]) for i in range(workers)]
        with ProcessPoolExecutor(workers) as pool:
            results = [r for part in pool.map(_run_chunk, chunks) for r in part]
    return summarize(design, results)


# ---------------------------------------------------------------------------
# Table 1

TABLE1_CELLS = ((2, 200), (4, 200), (2, 500), (4, 500))
TABLE1_FAMILIES = ("laplace", "normal")
# median x 100 and IQR x 100 of the ISE for density (i), as published
TABLE1_PUBLISHED = {
    ("laplace", 2, 200): (1.41, 0.94), ("laplace", 4, 200): (1.56, 0.98),
    ("laplace", 2, 500): (0.89, 0.51), ("laplace", 4, 500): (0.96, 0.58),
    ("normal", 2, 200): (2.09, 1.33), ("normal", 4, 200): (2.31, 1.43),
    ("normal", 2, 500): (1.42, 0.92), ("normal", 4, 500): (1.55, 1.02),
}


def table1_designs(reps=500, seed=0):
    designs = {}
    for family in TABLE1_FAMILIES:
        for nj, m in TABLE1_CELLS:
            designs[(family, nj, m)] = SimDesign("density", "i", family, n=m // nj, replicates=nj,
                                                 reps=reps, seed=seed)
    return designs


def table1(designs=None, reps=500, seed=0, workers=1):
    """Median and IQR (both x100) of the ISE for each Table 1 cell."""
    designs = table1_designs(reps, seed) if designs is None else designs
    out = {}
    for key, design in designs.items():
        s = monte_carlo(design, workers)
        out[key] = (100.0 * s.median, 100.0 * s.iqr)
    return out


def format_table1(cells) -> str:
    header = "(N_j, M)\t" + "\t".join(f"({nj}, {m})" for nj, m in TABLE1_CELLS)
    lines = [header]
    for family, label in zip(TABLE1_FAMILIES, ("U ~ Lap", "U ~ Norm")):
        row = [f"{cells[(family, nj, m)][0]:.2f} ({cells[(family, nj, m)][1]:.2f})" for nj, m in TABLE1_CELLS]
        lines.append(label + "\t" + "\t".join(row))
    return "\n".join(lines)
