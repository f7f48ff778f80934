"""Command-line interface: read replicated data, estimate, write CSV + JSON."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from collections import OrderedDict
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__, numerics
from .bandwidth import (
    bin_sample,
    default_search_grid,
    plugin_bandwidth_density,
    select_cv_bandwidth,
)
from .density import clip_and_renormalize, default_grid, estimate_density, estimate_density_known
from .error_model import error_moments, estimated_cf, known_cf, tail_correct, unit_cf
from .errors import DeconvolutionError, DegenerateError, InconsistentY, NoPairs, ParseError
from .regression import estimate_regression
from .samples import RegressionSample, ReplicatedSample
from .simulation import PLUGIN_BOUNDS, SimDesign, format_table1, monte_carlo, table1, table1_designs

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


# ---------------------------------------------------------------------------
# Ingestion and emission


def _float(cell, lineno, log):
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"not a number: {cell!r}", line=lineno) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite value: {cell!r}", line=lineno)
    if log:
        if value <= 0:
            raise ParseError(f"cannot take the log of {cell!r}", line=lineno)
        value = math.log(value)
    return value


def _add_y(ys, key, y, lineno):
    if key in ys and ys[key] != y:
        raise InconsistentY(f"response differs within group {key!r}", line=lineno)
    ys[key] = y


def ingest(path, format="wide", log=False):
    """Read a replicated sample from CSV.

    Parameters
    ----------
    path : str or Path
    format : {"wide", "long"}
        Wide files have a header ``id,w1,w2,...[,y]`` with blank cells for
        missing replicates; long files have ``id,rep,w[,y]``.
    log : bool
        Take the natural log of every ``w`` value.

    Returns
    -------
    ReplicatedSample or RegressionSample
        The latter when a ``y`` column is present.
    """
    groups = OrderedDict()
    ys = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file", line=1) from None
        has_y = bool(header) and header[-1] == "y"
        if format == "wide":
            w_cols = header[1:-1] if has_y else header[1:]
            if not header or header[0] != "id" or not w_cols or any(not c.startswith("w") for c in w_cols):
                raise ParseError("expected header id,w1,w2,...[,y]", line=1)
        elif format == "long":
            if header[:3] != ["id", "rep", "w"] or len(header) != 3 + has_y:
                raise ParseError("expected header id,rep,w[,y]", line=1)
        else:
            raise ValueError(f"unknown format {format!r}")
        for row in reader:
            lineno = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=lineno)
            row = [c.strip() for c in row]
            key = row[0]
            if not key:
                raise ParseError("missing id", line=lineno)
            if format == "wide":
                cells = row[1:-1] if has_y else row[1:]
                values = [_float(c, lineno, log) for c in cells if c != ""]
                if not values:
                    raise ParseError("row has no replicate values", line=lineno)
                if key in groups:
                    raise ParseError(f"duplicate id {key!r}", line=lineno)
                groups[key] = values
            else:
                if row[2] == "":
                    raise ParseError("missing w value", line=lineno)
                groups.setdefault(key, []).append(_float(row[2], lineno, log))
            if has_y:
                _add_y(ys, key, _float(row[-1], lineno, False), lineno)
    if not groups:
        raise ParseError("no data rows", line=2)
    sample = ReplicatedSample(list(groups.values()))
    if has_y:
        return RegressionSample(sample, np.array([ys[k] for k in groups]))
    return sample


def _fmt(x):
    return repr(float(x))


def emit(sample, path, format="wide"):
    """Write a sample in a format :func:`ingest` reads back exactly."""
    base = sample.base if isinstance(sample, RegressionSample) else sample
    y = sample.y if isinstance(sample, RegressionSample) else None
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if format == "wide":
            width = int(base.sizes.max())
            writer.writerow(["id"] + [f"w{k + 1}" for k in range(width)] + (["y"] if y is not None else []))
            for j, g in enumerate(base.groups):
                cells = [_fmt(v) for v in g] + [""] * (width - g.size)
                writer.writerow([j + 1] + cells + ([_fmt(y[j])] if y is not None else []))
        elif format == "long":
            writer.writerow(["id", "rep", "w"] + (["y"] if y is not None else []))
            for j, g in enumerate(base.groups):
                for k, v in enumerate(g):
                    writer.writerow([j + 1, k + 1, _fmt(v)] + ([_fmt(y[j])] if y is not None else []))
        else:
            raise ValueError(f"unknown format {format!r}")


def _write_curve(path, grid, columns):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x"] + list(columns))
        cols = [np.asarray(c, dtype=float) for c in columns.values()]
        for i, x in enumerate(grid):
            writer.writerow([_fmt(x)] + ["" if not np.isfinite(c[i]) else _fmt(c[i]) for c in cols])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _write_sidecar(path, meta):
    meta = {**meta, "version": __version__}
    Path(path).write_text(json.dumps(_jsonable(meta), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def sidecar_path(out):
    return Path(str(out) + ".json")


# ---------------------------------------------------------------------------
# Configuration


@dataclass
class RunConfig:
    """Parsed command line: one command plus its options."""

    command: str
    input: str | None = None
    output: str | None = None
    cf: str = "tail"
    family: str | None = None
    sigma2: float | None = None
    rho: float = 0.0
    bandwidth: str = "auto"
    h: float | None = None
    grid: tuple | None = None
    seed: int = 0
    design: str | None = None

    @classmethod
    def from_args(cls, args):
        names = cls.__dataclass_fields__
        return cls(**{k: getattr(args, k) for k in names if hasattr(args, k)})

    def validate(self):
        """Check that the options are consistent with each other and the command."""
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if self.command in ("simulate", "bench-table1"):
            return self
        if self.cf == "known" and (self.family is None or self.sigma2 is None):
            raise ValueError("--cf known needs --family and --sigma2")
        if self.cf != "known" and (self.family is not None or self.sigma2 is not None):
            raise ValueError("--family/--sigma2 only apply with --cf known")
        if self.cf == "ridged" and not self.rho > 0:
            raise ValueError("--cf ridged needs --rho > 0")
        if self.cf != "ridged" and self.rho != 0:
            raise ValueError("--rho only applies with --cf ridged")
        if self.bandwidth == "fixed" and not (self.h is not None and self.h > 0):
            raise ValueError("--bandwidth fixed needs --h > 0")
        if self.h is not None and self.bandwidth not in ("fixed", "auto"):
            raise ValueError("--h conflicts with a data-driven bandwidth")
        return self


def _parse_grid(text):
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("grid is lo,hi,points")
    lo, hi, pts = float(parts[0]), float(parts[1]), int(parts[2])
    if not (hi > lo and pts >= 2):
        raise argparse.ArgumentTypeError("grid needs hi > lo and points >= 2")
    return lo, hi, pts


def _estimation_args(p, regression):
    p.add_argument("input", help="CSV file with replicated measurements")
    p.add_argument("-o", "--output", required=True, help="output CSV; metadata goes to OUTPUT.json")
    p.add_argument("--format", choices=["wide", "long"], default="wide")
    p.add_argument("--log", action="store_true", help="natural log of every measurement")
    p.add_argument("--cf", choices=["known", "raw", "ridged", "tail"], default="tail",
                   help="error CF: closed form, raw estimate, ridged raw estimate or tail corrected")
    p.add_argument("--family", choices=["laplace", "normal"])
    p.add_argument("--sigma2", type=float, help="error variance for --cf known")
    p.add_argument("--rho", type=float, default=0.0)
    choices = ["auto", "fixed", "cv"] if regression else ["auto", "fixed", "plugin"]
    p.add_argument("--bandwidth", choices=choices, default="auto",
                   help="fixed needs --h; auto means fixed when --h is given, else "
                   + ("cv" if regression else "plugin"))
    p.add_argument("--h", type=float)
    p.add_argument("--grid", type=_parse_grid, help="lo,hi,points")
    p.add_argument("--seed", type=int, default=0, help="recorded in metadata; estimation is deterministic")


def build_parser():
    parser = argparse.ArgumentParser(prog="repdeconv", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate-density", help="deconvolution density estimate")
    _estimation_args(p, regression=False)
    p.add_argument("--clip", action="store_true", help="clip negative values and renormalize")

    p = sub.add_parser("estimate-regression", help="errors-in-variables regression estimate")
    _estimation_args(p, regression=True)

    p = sub.add_parser("select-bandwidth", help="print the data-driven bandwidth as JSON")
    p.add_argument("input")
    p.add_argument("-o", "--output", help="JSON file; stdout when omitted")
    p.add_argument("--format", choices=["wide", "long"], default="wide")
    p.add_argument("--log", action="store_true")
    p.add_argument("--cf", choices=["known", "raw", "ridged", "tail"], default="tail")
    p.add_argument("--family", choices=["laplace", "normal"])
    p.add_argument("--sigma2", type=float)
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--bandwidth", choices=["auto", "plugin", "cv"], default="auto",
                   help="auto: cv when the data have a y column, plugin otherwise")

    p = sub.add_parser("simulate", help="Monte Carlo study of one design")
    p.add_argument("design", help="KIND-TARGET, e.g. density-i or regression-ii")
    p.add_argument("-o", "--output", required=True, help="quartile-curve CSV (x,q1,q2,q3)")
    p.add_argument("--family", choices=["laplace", "normal"], default="laplace")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--replicates", type=int, default=2)
    p.add_argument("--reps", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nsr", type=float, help="noise-to-signal ratio of the covariate error")
    p.add_argument("--x-dist", choices=["uniform", "normal"], default="uniform")
    p.add_argument("--method", choices=["estimated", "known"], default="estimated")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("bench-table1", help="reproduce the density (i) simulation table")
    p.add_argument("-o", "--output", required=True, help="table CSV")
    p.add_argument("--reps", type=int, default=500)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    return parser


# ---------------------------------------------------------------------------
# Commands


def _make_cf(args, sample, h_lo, q):
    """Error CF for the chosen mode plus its metadata."""
    if args.cf == "known":
        cf = known_cf(args.family, args.sigma2)
    elif args.cf == "tail":
        try:
            cf = tail_correct(sample, q.nodes / h_lo)
        except DegenerateError:
            # replicates agree exactly: no measurement error to remove
            cf = unit_cf()
    else:
        cf = estimated_cf(sample)
    return cf


def _sigma2(args, sample):
    if args.cf == "known":
        return args.sigma2
    try:
        return error_moments(sample).sigma2
    except NoPairs:
        return 0.0


def _h_lo(args, base, kind):
    if args.h is not None:
        return args.h
    if kind == "plugin":
        return PLUGIN_BOUNDS[0] * np.std(base.pooled(), ddof=1)
    return float(default_search_grid(base)[0])


def _bandwidth_kind(args, regression):
    if args.bandwidth == "auto":
        return "fixed" if args.h is not None else ("cv" if regression else "plugin")
    return args.bandwidth


def _select(kind, args, data, cf, q):
    """Return ``(h, info)`` for a plug-in or CV bandwidth."""
    if kind == "plugin":
        h = plugin_bandwidth_density(data, cf, sigma2_u=_sigma2(args, data), q=q, bounds=PLUGIN_BOUNDS)
        return h, {"selector": "plugin"}
    grid = default_search_grid(data)
    cv = select_cv_bandwidth(data, cf, grid, binned=bin_sample(data), q=q)
    return cv.h_selected, {"selector": "cv", "boundary": cv.boundary,
                           "search_grid": [float(grid[0]), float(grid[-1]), int(grid.size)]}


def _grid(args, base, h):
    if args.grid is not None:
        return np.linspace(*args.grid)
    return default_grid(base, h)


def _cf_meta(cf, rho):
    meta = {"cf": cf.metadata(), "rho": rho}
    for key in ("A_U", "B_U", "t_A"):
        if key in cf.params:
            meta[key] = float(cf.params[key])
    return meta


def cmd_estimate_density(args):
    sample = ingest(args.input, args.format, args.log)
    if isinstance(sample, RegressionSample):
        sample = sample.base
    q = numerics.DEFAULT_QUADRATURE
    kind = _bandwidth_kind(args, regression=False)
    cf = _make_cf(args, sample, _h_lo(args, sample, kind), q)
    h, sel = (args.h, {"selector": "fixed"}) if kind == "fixed" else _select(kind, args, sample, cf, q)
    grid = _grid(args, sample, h)
    if args.cf == "known":
        est = estimate_density_known(sample, cf, h, grid=grid, q=q)
    else:
        est = estimate_density(sample, cf, h, rho=args.rho, grid=grid, q=q)
    if args.clip:
        est = clip_and_renormalize(est)
    _write_curve(args.output, est.grid, {"estimate": est.values})
    _write_sidecar(sidecar_path(args.output), {
        "command": args.command, "h": h, "method": est.method, "bandwidth": sel,
        "seed": args.seed, "grid": [float(grid[0]), float(grid[-1]), int(grid.size)],
        "clipped": bool(args.clip), "integral": est.integral(), "n": sample.n, "M": sample.M,
        **_cf_meta(cf, args.rho),
    })


def cmd_estimate_regression(args):
    data = ingest(args.input, args.format, args.log)
    if not isinstance(data, RegressionSample):
        raise ParseError("regression needs a y column")
    q = numerics.DEFAULT_QUADRATURE
    kind = _bandwidth_kind(args, regression=True)
    cf = _make_cf(args, data.base, _h_lo(args, data.base, kind), q)
    h, sel = (args.h, {"selector": "fixed"}) if kind == "fixed" else _select(kind, args, data, cf, q)
    grid = _grid(args, data.base, h)
    est = estimate_regression(data, cf, h, rho=args.rho, grid=grid, q=q, known=args.cf == "known")
    _write_curve(args.output, est.grid, {"estimate": est.ratio, "numerator": est.numerator,
                                         "denominator": est.denominator})
    _write_sidecar(sidecar_path(args.output), {
        "command": args.command, "h": h, "method": est.method, "bandwidth": sel,
        "seed": args.seed, "grid": [float(grid[0]), float(grid[-1]), int(grid.size)],
        "guard": est.eps, "undefined_points": int((~est.defined).sum()), "n": data.n,
        **_cf_meta(cf, args.rho),
    })


def cmd_select_bandwidth(args):
    data = ingest(args.input, args.format, args.log)
    regression = isinstance(data, RegressionSample)
    kind = args.bandwidth if args.bandwidth != "auto" else ("cv" if regression else "plugin")
    if kind == "cv" and not regression:
        raise ValueError("cross-validation needs a y column")
    if kind == "plugin" and regression:
        data = data.base
    base = data.base if isinstance(data, RegressionSample) else data
    args.h = None
    q = numerics.DEFAULT_QUADRATURE
    cf = _make_cf(args, base, _h_lo(args, base, kind), q)
    h, sel = _select(kind, args, data, cf, q)
    text = json.dumps(_jsonable({"h": h, **sel, **_cf_meta(cf, args.rho), "version": __version__}),
                      indent=2, sort_keys=True) + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _common_grid(curves):
    grids = [g for g, _ in curves.values()]
    lo = min(g[0] for g in grids)
    hi = max(g[-1] for g in grids)
    size = max(g.size for g in grids)
    grid = np.linspace(lo, hi, size)
    cols = {k: np.interp(grid, g, v, left=np.nan, right=np.nan) for k, (g, v) in curves.items()}
    return grid, cols


def cmd_simulate(args):
    try:
        kind, target = args.design.split("-", 1)
    except ValueError:
        raise ValueError(f"design must look like density-i or regression-ii, got {args.design!r}") from None
    design = SimDesign(kind, target, args.family, n=args.n, replicates=args.replicates, reps=args.reps,
                       seed=args.seed, nsr_u=args.nsr, x_dist=args.x_dist, method=args.method)
    summary = monte_carlo(design, workers=args.workers)
    grid, cols = _common_grid(summary.quartile_curves)
    _write_curve(args.output, grid, cols)
    _write_sidecar(sidecar_path(args.output), {"command": args.command, "design_id": args.design,
                                                **summary.to_dict()})


def cmd_bench_table1(args):
    designs = table1_designs(args.reps, args.seed)
    cells = table1(designs, workers=args.workers)
    from .simulation import TABLE1_PUBLISHED

    with open(args.output, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["family", "N_j", "M", "median_x100", "iqr_x100", "published_median_x100",
                         "published_iqr_x100"])
        for (family, nj, m), (med, iqr) in cells.items():
            pub = TABLE1_PUBLISHED[(family, nj, m)]
            writer.writerow([family, nj, m, f"{med:.4f}", f"{iqr:.4f}", pub[0], pub[1]])
    _write_sidecar(sidecar_path(args.output), {"command": args.command, "reps": args.reps,
                                                "seed": args.seed,
                                                "designs": {f"{k[0]}-{k[1]}-{k[2]}": asdict(d)
                                                            for k, d in designs.items()}})
    sys.stdout.write(format_table1(cells) + "\n")


COMMANDS = {
    "estimate-density": cmd_estimate_density,
    "estimate-regression": cmd_estimate_regression,
    "select-bandwidth": cmd_select_bandwidth,
    "simulate": cmd_simulate,
    "bench-table1": cmd_bench_table1,
}


def _fail(exc, code):
    record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if getattr(exc, "line", None) is not None:
        record["line"] = exc.line
    sys.stderr.write(json.dumps(record, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_CONFIG
    try:
        RunConfig.from_args(args).validate()
        COMMANDS[args.command](args)
    except (ParseError, ValueError, OSError) as exc:
        return _fail(exc, EXIT_CONFIG)
    except DeconvolutionError as exc:
        return _fail(exc, EXIT_NUMERIC)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
