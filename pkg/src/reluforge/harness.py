"""Measurement and rate fitting: error sweeps, slope fits, growth tables."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np

from .netcore import DimensionError, Network, evaluate_batch, profile


@dataclass(frozen=True)
class SweepSpec:
    """Uniform evaluation grid, optionally skipping the gap strips.

    ``resolution`` is the number of points per axis (endpoints included).
    When ``exclude_gaps`` is set, points with a coordinate inside one of
    the open strips (k/levels - delta, k/levels), 1 <= k < levels, are
    dropped before the max is taken.
    """

    resolution: int = 101
    exclude_gaps: bool = False
    levels: int = 0
    delta: float = 0.0
    seed: int = 0
    chunk: int = 4096

    def __post_init__(self):
        if self.resolution < 2:
            raise ValueError("resolution must be >= 2")
        if self.exclude_gaps and (self.levels < 1 or not (self.delta > 0)):
            raise ValueError("gap exclusion needs levels >= 1 and delta > 0")


def _in_gap(coords: np.ndarray, levels: int, delta: float) -> np.ndarray:
    """True where a coordinate lies inside an open strip (k/R - delta, k/R)."""
    mask = np.zeros(coords.shape[0], dtype=bool)
    for k in range(1, levels):
        hi = k / levels
        lo = hi - delta
        mask |= np.any((coords > lo) & (coords < hi), axis=1)
    return mask


def grid_points(dim: int, spec: SweepSpec) -> np.ndarray:
    axes = [np.linspace(0.0, 1.0, spec.resolution)] * dim
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    if spec.exclude_gaps:
        pts = pts[~_in_gap(pts, spec.levels, spec.delta)]
    return pts


def sup_error(net: Network, oracle, spec: SweepSpec, dim: int | None = None) -> float:
    """max |net(x) - oracle(x)| over the grid (oracle is vectorized or scalar)."""
    d = net.input_dim if dim is None else dim
    if d != net.input_dim:
        raise DimensionError(f"network expects dim {net.input_dim}, sweep uses {d}")
    pts = grid_points(d, spec)
    worst = 0.0
    for start in range(0, pts.shape[0], spec.chunk):
        block = pts[start : start + spec.chunk]
        got = evaluate_batch(net, block)[:, 0]
        want = np.array([float(oracle(x)) for x in block])
        worst = max(worst, float(np.max(np.abs(got - want))))
    return worst


def fit_loglog(pairs, x_transform: str = "log"):
    """Least squares fit of log(value) against log(size) (or raw size).

    Returns (slope, intercept, r_squared); natural logs.  ``x_transform``
    may be "log" (default, log-log fit) or "identity" (semi-log fit,
    e.g. for geometric growth in an integer parameter).
    """
    pairs = list(pairs)
    if len(pairs) < 3:
        raise ValueError("need at least 3 pairs")
    xs = np.array([p[0] for p in pairs], dtype=np.float64)
    ys = np.array([p[1] for p in pairs], dtype=np.float64)
    if np.any(ys <= 0):
        raise ValueError("values must be positive for a log fit")
    if x_transform == "log":
        if np.any(xs <= 0):
            raise ValueError("sizes must be positive for a log-log fit")
        xs = np.log(xs)
    elif x_transform != "identity":
        raise ValueError(f"unknown x_transform {x_transform!r}")
    ys = np.log(ys)
    return _ols(xs, ys)


def _ols(xs: np.ndarray, ys: np.ndarray):
    xbar, ybar = xs.mean(), ys.mean()
    sxx = np.sum((xs - xbar) ** 2)
    if sxx == 0:
        raise ValueError("degenerate fit: all sizes equal")
    slope = float(np.sum((xs - xbar) * (ys - ybar)) / sxx)
    intercept = float(ybar - slope * xbar)
    resid = ys - (intercept + slope * xs)
    sstot = float(np.sum((ys - ybar) ** 2))
    r2 = 1.0 if sstot == 0 else 1.0 - float(np.sum(resid**2)) / sstot
    return slope, intercept, r2


@dataclass
class GrowthRow:
    n: int
    l: int
    width: int
    depth: int
    param_sup: float
    sup_error: float
    runtime: float


@dataclass
class GrowthReport:
    """Per-(n, l) size/error records plus fitted slopes.

    ``slopes`` maps a label to (slope, intercept, r_squared).
    """

    rows: list[GrowthRow] = field(default_factory=list)
    slopes: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["n", "l", "width", "depth", "param_sup", "sup_error", "runtime"]
        )
        for r in self.rows:
            writer.writerow(
                [r.n, r.l, r.width, r.depth, repr(r.param_sup), repr(r.sup_error), f"{r.runtime:.6f}"]
            )
        for label, (slope, intercept, r2) in sorted(self.slopes.items()):
            writer.writerow([f"# {label}", repr(slope), repr(intercept), repr(r2), "", "", ""])
        return buf.getvalue()


def run_growth_study(constructor, sizes, oracle=None, spec: SweepSpec | None = None) -> GrowthReport:
    """Build a network per (n, l), profile it, sweep its error, fit slopes.

    ``constructor(n, l)`` must return a Network deterministically.  The
    error column is NaN when no oracle is supplied.  Slopes are fitted
    for param_sup vs n (per fixed l with >= 3 points), param_sup vs l
    (per fixed n), and sup_error vs n*l when errors are available.
    """
    report = GrowthReport()
    for n, l in sizes:
        t0 = time.perf_counter()
        net = constructor(n, l)
        built = time.perf_counter() - t0
        prof = profile(net)
        err = float("nan")
        if oracle is not None:
            err = sup_error(net, oracle, spec or SweepSpec())
        report.rows.append(
            GrowthRow(n, l, prof.width, prof.depth, prof.param_sup, err,
                      time.perf_counter() - t0)
        )
        del net
    rows = sorted(report.rows, key=lambda r: (r.n, r.l))
    report.rows = rows
    for l in sorted({r.l for r in rows}):
        sub = [r for r in rows if r.l == l]
        if len(sub) >= 3:
            report.slopes[f"param_sup_vs_n@l={l}"] = fit_loglog(
                [(r.n, r.param_sup) for r in sub]
            )
    for n in sorted({r.n for r in rows}):
        sub = [r for r in rows if r.n == n]
        if len(sub) >= 3:
            report.slopes[f"param_sup_vs_l@n={n}"] = fit_loglog(
                [(r.l, r.param_sup) for r in sub]
            )
    with_err = [r for r in rows if np.isfinite(r.sup_error) and r.sup_error > 0]
    if len(with_err) >= 3:
        report.slopes["sup_error_vs_nl"] = fit_loglog(
            [(r.n * r.l, r.sup_error) for r in with_err]
        )
    return report
