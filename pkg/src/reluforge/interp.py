"""Exact piecewise-linear interpolation constructors.

Three builders are provided:

* ``build_equi_interp``   -- single hidden layer over an equidistant grid;
  the outer weights are second differences of the targets in closed form.
* ``build_inequi_interp`` -- single hidden layer over a "notched" grid
  (integer points k/R, each preceded by a point at k/R - delta) hitting
  a designated subset of 2m+1 points.
* ``build_two_layer_interp`` -- two hidden layers of widths 2m and 2n+1
  hitting every grid point with nonnegative targets.  The second layer
  is assembled from a base interpolant plus per-point correction pairs
  (one positive and one negative channel each), whose values follow a
  closed-form residual recursion (see ``fkl_table``).

The residual table ``fkl_table`` exposes both the one-step recursion and
the closed form in terms of the first residual row; the two must agree,
which is the main internal consistency check of the construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .netcore import IDENTITY, RELU, AffineLayer, Network, NetworkError


class GridError(NetworkError):
    """Grid arithmetic is inconsistent with the required family."""


@dataclass(frozen=True)
class EquiGrid:
    """Equidistant grid x_k = origin + k/rate for 0 <= k <= count."""

    rate: float
    count: int
    origin: float = 0.0

    def __post_init__(self):
        if not (self.rate > 0):
            raise GridError("rate must be positive")
        if self.count < 1:
            raise GridError("count must be >= 1")

    def points(self) -> np.ndarray:
        return self.origin + np.arange(self.count + 1) / self.rate


@dataclass(frozen=True)
class InequiGrid:
    """Notched grid: x_{2k} = k/rate and x_{2k-1} = k/rate - delta.

    ``delta = 1/((c+1) * rate)`` for a natural ``c >= 1``.  The grid has
    2*count+1 points and splits into ``blocks`` stretches of ``inner+1``
    points each: 2*count = blocks*(inner+1) with inner odd.
    """

    rate: float
    count: int
    c: int
    blocks: int
    inner: int
    origin: float = 0.0

    def __post_init__(self):
        if not (self.rate > 0):
            raise GridError("rate must be positive")
        if self.c < 1 or int(self.c) != self.c:
            raise GridError("c must be a natural number >= 1")
        if 2 * self.count != self.blocks * (self.inner + 1):
            raise GridError(
                f"2*count={2 * self.count} != blocks*(inner+1)="
                f"{self.blocks * (self.inner + 1)}"
            )
        if (self.inner + 1) % 2 != 0:
            raise GridError("inner+1 must be even")

    @property
    def delta(self) -> float:
        return 1.0 / ((self.c + 1) * self.rate)

    @property
    def alpha(self) -> float:
        """rate * delta = 1/(c+1), in (0, 1/2]."""
        return 1.0 / (self.c + 1)

    @property
    def half_block(self) -> int:
        return (self.inner + 1) // 2

    def point(self, i: int) -> float:
        if i % 2 == 0:
            return self.origin + (i // 2) / self.rate
        return self.origin + ((i + 1) // 2) / self.rate - self.delta

    def points(self) -> np.ndarray:
        return np.array([self.point(i) for i in range(2 * self.count + 1)])

    def designated_indices(self) -> np.ndarray:
        """Grid indices of the 2*blocks+1 designated interpolation points."""
        m, n = self.blocks, self.inner
        idx = sorted(
            [j * (n + 1) for j in range(m + 1)]
            + [j * (n + 1) + n for j in range(m)]
        )
        return np.array(idx, dtype=int)

    def designated_points(self) -> np.ndarray:
        return np.array([self.point(i) for i in self.designated_indices()])


def equi_weights(rate: float, targets) -> np.ndarray:
    """Closed-form outer weights for the equidistant interpolant.

    w_0 = rate*(y_1 - y_0) and w_j = rate * second difference at j; the
    hidden unit at x_j contributes the slope change of the interpolant.
    """
    y = np.asarray(targets, dtype=np.float64)
    if y.size < 2:
        raise GridError("need at least two targets")
    w = np.empty(y.size - 1)
    w[0] = rate * (y[1] - y[0])
    if y.size > 2:
        w[1:] = rate * (y[2:] - 2 * y[1:-1] + y[:-2])
    return w


def build_equi_interp(grid: EquiGrid, targets) -> Network:
    """Single-hidden-layer net with net(x_k) = y_k on the equidistant grid."""
    y = np.asarray(targets, dtype=np.float64)
    if y.size != grid.count + 1:
        raise GridError(f"expected {grid.count + 1} targets, got {y.size}")
    if not np.all(np.isfinite(y)):
        raise GridError("targets must be finite")
    x = grid.points()
    w = equi_weights(grid.rate, y)
    hidden = AffineLayer(np.ones((grid.count, 1)), -x[:-1], RELU)
    out = AffineLayer(w.reshape(1, -1), np.array([y[0]]), IDENTITY)
    return Network(1, (hidden, out))


def equi_param_bound(grid: EquiGrid, targets) -> float:
    """Exact parameter bound of the equidistant construction.

    max(1, |x_0|, |x_{count-1}|, |y_0|, rate*|y_1-y_0|, rate*max |second diff|).
    The first-slope term rate*(y_1-y_0) is the slope change at x_0 (the
    interpolant is constant left of the grid), i.e. the boundary case of
    the second-difference formula.
    """
    y = np.asarray(targets, dtype=np.float64)
    x = grid.points()
    second = np.max(np.abs(y[2:] - 2 * y[1:-1] + y[:-2])) if y.size > 2 else 0.0
    return max(
        1.0,
        abs(x[0]),
        abs(x[-2]),
        abs(y[0]),
        grid.rate * abs(y[1] - y[0]),
        grid.rate * second,
    )


def inequi_weights(grid: InequiGrid, values) -> np.ndarray:
    """Closed-form outer weights hitting the designated points.

    ``values`` holds the 2*blocks+1 designated targets in grid order.
    """
    v = np.asarray(values, dtype=np.float64)
    m = grid.blocks
    if v.size != 2 * m + 1:
        raise GridError(f"expected {2 * m + 1} designated targets, got {v.size}")
    p = grid.half_block
    cp1 = grid.c + 1.0
    q = p * cp1 - 1.0  # (z_{2j+1} - z_{2j}) * (c+1) * rate
    w = np.empty(2 * m)
    w[0] = cp1 * grid.rate / q * (v[1] - v[0])
    for j in range(m):
        w[2 * j + 1] = cp1 * grid.rate * (
            v[2 * j + 2] - (1.0 + 1.0 / q) * v[2 * j + 1] + v[2 * j] / q
        )
    for j in range(1, m):
        w[2 * j] = cp1 * grid.rate * (
            v[2 * j + 1] / q - (1.0 + 1.0 / q) * v[2 * j] + v[2 * j - 1]
        )
    return w


def build_inequi_interp(grid: InequiGrid, values) -> Network:
    """Single-hidden-layer net of width 2*blocks hitting the designated points."""
    v = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise GridError("targets must be finite")
    z = grid.designated_points()
    w = inequi_weights(grid, v)
    hidden = AffineLayer(np.ones((2 * grid.blocks, 1)), -z[:-1], RELU)
    out = AffineLayer(w.reshape(1, -1), np.array([v[0]]), IDENTITY)
    return Network(1, (hidden, out))


# ---------------------------------------------------------------------------
# Residual machinery for the two-hidden-layer construction
# ---------------------------------------------------------------------------


def _tau(i: int, alpha: float) -> float:
    """Block-local coordinate of grid offset i, in units of 1/(2*rate)."""
    return float(i) if i % 2 == 0 else i + 1 - 2 * alpha


def first_residuals(grid: InequiGrid, targets) -> np.ndarray:
    """f_1 values: data minus the base interpolant, per block and offset.

    Returns an array of shape (blocks, inner+1); entry [j, l] is the
    residual at grid point j*(inner+1)+l after subtracting the linear
    base through the block endpoints.  Offsets 0 and ``inner`` vanish.
    """
    y = np.asarray(targets, dtype=np.float64)
    m, n = grid.blocks, grid.inner
    a = grid.alpha
    tau_n = _tau(n, a)
    out = np.zeros((m, n + 1))
    for j in range(m):
        left = y[j * (n + 1)]
        right = y[j * (n + 1) + n]
        for l in range(n + 1):
            base = left + _tau(l, a) / tau_n * (right - left)
            out[j, l] = y[j * (n + 1) + l] - base
    return out


def _step_coeff(k: int, l: int, alpha: float) -> float:
    """One-step residual coefficient: f_{k,l} = f_{k-1,l} + coeff*f_{k-1,k-1}."""
    if k % 2 == 0:
        if l % 2 == 0:
            return (k - l - 2) / (2 * (1 - alpha))
        return (k - l - 3 + 2 * alpha) / (2 * (1 - alpha))
    if l % 2 == 0:
        return (k - l - 1 - 2 * alpha) / (2 * alpha)
    return (k - l - 2) / (2 * alpha)


def _closed_coeffs(k: int, l: int, alpha: float) -> tuple[float, float]:
    """Closed-form coefficients (a, b): f_{k,l} = f_{1,l} + a f_{1,k-1} + b f_{1,k-2}."""
    if k % 2 == 0:
        if l % 2 == 0:
            return (
                -(l - k + 2) / (2 * (1 - alpha)),
                (l - k + 2 * alpha) / (2 * (1 - alpha)),
            )
        return (
            -(l - k + 3 - 2 * alpha) / (2 * (1 - alpha)),
            (l - k + 1) / (2 * (1 - alpha)),
        )
    if l % 2 == 0:
        return (
            -(l - k + 1 + 2 * alpha) / (2 * alpha),
            (l - k + 1) / (2 * alpha),
        )
    return (
        -(l - k + 2) / (2 * alpha),
        (l - k + 2 - 2 * alpha) / (2 * alpha),
    )


def diagonal_residuals(grid: InequiGrid, f1: np.ndarray) -> np.ndarray:
    """f_{k,k} for k = 1..inner from the closed form, shape (inner+1, blocks).

    Row 0 is unused (zeros); row 1 copies f1[:, 1].  For k >= 2 the even
    and odd branches reduce to combinations of f_{1,k}, f_{1,k-1} and
    f_{1,k-2}.
    """
    m, n = grid.blocks, grid.inner
    a = grid.alpha
    out = np.zeros((n + 1, m))
    if n >= 1:
        out[1] = f1[:, 1]
    for k in range(2, n + 1):
        if k % 2 == 0:
            out[k] = f1[:, k] - f1[:, k - 1] / (1 - a) + a / (1 - a) * f1[:, k - 2]
        else:
            out[k] = f1[:, k] - f1[:, k - 1] / a + (1 - a) / a * f1[:, k - 2]
    return out


@dataclass(frozen=True)
class FklTable:
    """Residual values from the recursion and from the closed form.

    ``recursion[k, l, j]`` and ``closed[k, l, j]`` are populated for
    1 <= k <= l <= inner (closed additionally needs k >= 2); other
    entries are NaN.  ``first`` is the f_1 row (blocks, inner+1).
    """

    alpha: float
    first: np.ndarray
    recursion: np.ndarray
    closed: np.ndarray
    diag_bound: float = field(default=0.0)

    def max_diagonal(self) -> float:
        n = self.recursion.shape[0] - 1
        vals = [
            np.max(np.abs(self.recursion[k, k]))
            for k in range(1, n + 1)
        ]
        return max(vals) if vals else 0.0


def fkl_table(grid: InequiGrid, targets) -> FklTable:
    """Compute residual values both ways; the two routes must agree.

    The recursion walks k upward from the first residual row; the closed
    form expresses every f_{k,l} directly in terms of f_{1,.}.
    """
    y = np.asarray(targets, dtype=np.float64)
    m, n = grid.blocks, grid.inner
    if y.size != m * (n + 1) + 1:
        raise GridError(f"expected {m * (n + 1) + 1} targets, got {y.size}")
    a = grid.alpha
    f1 = first_residuals(grid, y)
    rec = np.full((n + 1, n + 1, m), np.nan)
    clo = np.full((n + 1, n + 1, m), np.nan)
    for l in range(1, n + 1):
        rec[1, l] = f1[:, l]
    for k in range(2, n + 1):
        for l in range(k, n + 1):
            rec[k, l] = rec[k - 1, l] + _step_coeff(k, l, a) * rec[k - 1, k - 1]
            ca, cb = _closed_coeffs(k, l, a)
            f_km2 = f1[:, k - 2] if k >= 2 else 0.0
            clo[k, l] = f1[:, l] + ca * f1[:, k - 1] + cb * f_km2
    # |f_{k,k}| <= 3(c+1) * Y, with Y the usual target-variation bound
    yvar = abs(y[0]) + np.max(np.abs(np.diff(y)))
    bound = 3 * (grid.c + 1) * yvar
    return FklTable(alpha=a, first=f1, recursion=rec, closed=clo, diag_bound=bound)


def _correction_endpoints(k: int, n: int, alpha: float) -> tuple[float, float]:
    """Block-endpoint multipliers (left, right) of the k-th correction.

    The correction is linear on the block, vanishes at offset k-1 and
    equals the diagonal residual at offset k; these are its values at
    offsets 0 and n as multiples of that residual.
    """
    if k % 2 == 0:
        return 1 - k / (2 * alpha), (n + 1 - k) / (2 * alpha)
    return -(k - 1) / (2 * (1 - alpha)), (n - k + 2 * (1 - alpha)) / (2 * (1 - alpha))


def _as_inequi(grid, targets, blocks=None, inner=None):
    """Normalize either grid family to the notched form for the 2-layer path."""
    if isinstance(grid, InequiGrid):
        return grid
    if not isinstance(grid, EquiGrid):
        raise GridError(f"unsupported grid type {type(grid).__name__}")
    count = grid.count
    if inner is None or blocks is None:
        inner = 1
        blocks = count // 2
    if blocks * (inner + 1) != count:
        raise GridError(f"blocks*(inner+1) must equal count={count}")
    # equidistant spacing h = 1/rate becomes the notch width: c = 1 and the
    # notched grid rate is rate/2, so all 2*(count/2)+1 points coincide.
    if count % 2 != 0:
        raise GridError("two-layer path needs an even interval count")
    return InequiGrid(
        rate=grid.rate / 2.0,
        count=count // 2,
        c=1,
        blocks=blocks,
        inner=inner,
        origin=grid.origin,
    )


def build_two_layer_interp(grid, targets, blocks=None, inner=None) -> Network:
    """Two-hidden-layer net hitting every grid point (targets >= 0).

    Hidden widths are exactly 2*blocks and 2*inner+1.  Accepts the
    notched grid directly or an equidistant grid (converted with c=1;
    the default split uses inner=1).  ``inner == 0`` degenerates to the
    single-hidden-layer builder since every point is then designated.
    """
    y = np.asarray(targets, dtype=np.float64)
    if np.any(y < 0):
        raise GridError("two-layer construction requires nonnegative targets")
    if not np.all(np.isfinite(y)):
        raise GridError("targets must be finite")
    if isinstance(grid, EquiGrid) and (inner == 0 or grid.count == 1):
        return build_equi_interp(grid, y)
    g = _as_inequi(grid, y, blocks=blocks, inner=inner)
    m, n = g.blocks, g.inner
    if y.size != m * (n + 1) + 1:
        raise GridError(f"expected {m * (n + 1) + 1} targets, got {y.size}")
    a = g.alpha
    didx = g.designated_indices()
    z = g.designated_points()

    rows = []
    biases = []
    signs = [1.0]
    v0 = y[didx]
    rows.append(inequi_weights(g, v0))
    biases.append(v0[0])

    f1 = first_residuals(g, y)
    diag = diagonal_residuals(g, f1)
    for k in range(1, n + 1):
        left_mult, right_mult = _correction_endpoints(k, n, a)
        pos = np.zeros(2 * m + 1)
        neg = np.zeros(2 * m + 1)
        for j in range(m):
            fkk = diag[k, j]
            if fkk >= 0:
                pos[2 * j] = left_mult * fkk
                pos[2 * j + 1] = right_mult * fkk
            else:
                neg[2 * j] = -left_mult * fkk
                neg[2 * j + 1] = -right_mult * fkk
        for vals, sign in ((pos, 1.0), (neg, -1.0)):
            rows.append(inequi_weights(g, vals))
            biases.append(vals[0])
            signs.append(sign)

    w1 = np.ones((2 * m, 1))
    b1 = -z[:-1]
    w2 = np.vstack(rows)
    b2 = np.array(biases)
    w3 = np.array(signs).reshape(1, -1)
    return Network(
        1,
        (
            AffineLayer(w1, b1, RELU),
            AffineLayer(w2, b2, RELU),
            AffineLayer(w3, np.zeros(1), IDENTITY),
        ),
    )


def two_layer_param_scale(grid, targets) -> float:
    """Reference scale max(X, c^3 * inner * rate * Y) for parameter audits."""
    y = np.asarray(targets, dtype=np.float64)
    if isinstance(grid, EquiGrid):
        g = _as_inequi(grid, y)
        x_max = np.max(np.abs(grid.points()))
    else:
        g = grid
        x_max = np.max(np.abs(g.points()))
    yvar = abs(y[0]) + (np.max(np.abs(np.diff(y))) if y.size > 1 else 0.0)
    return max(x_max, g.c**3 * max(g.inner, 1) * g.rate * yvar, 1.0)
