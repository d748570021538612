"""Building-block networks: steps, bit machinery, squaring, products.

Everything here is assembled from the interpolation constructors and the
composition algebra.  Parameter magnitudes are the point: in particular
the bit-extraction nets route every scale-by-2^L through a width-2
doubling pipeline (``build_pow2_multiplier``) so no stored parameter
ever reaches 2^L; the price is depth quadratic instead of linear in L.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .algebra import (
    affine_net,
    apply_output_affine,
    compose_parallel,
    compose_serial,
    compose_stack,
    identity_channel,
    pad_second_hidden,
    widen_to_deep,
)
from .interp import EquiGrid, GridError, InequiGrid, build_two_layer_interp, equi_weights
from .netcore import IDENTITY, RELU, AffineLayer, Network, NetworkError


@dataclass(frozen=True)
class StepSpec:
    """Parameters of a step-function net: dimension, size budgets, gap width.

    ``levels`` (the plateau count K) is floor(n^(1/d))^2 * floor(l^(2/d));
    ``delta`` must equal 1/((c+1)*K) for a natural c >= 1.
    """

    d: int
    n: int
    l: int
    delta: float

    def __post_init__(self):
        if self.d < 1 or self.n < 1 or self.l < 1:
            raise NetworkError("d, n, l must be >= 1")
        if not (0 < self.delta < 1):
            raise NetworkError("delta must lie in (0, 1)")
        self.gap_subdivision()  # validates admissibility

    @property
    def levels(self) -> int:
        root = int(math.floor(self.n ** (1.0 / self.d)))
        return root * root * int(math.floor(self.l ** (2.0 / self.d)))

    def gap_subdivision(self) -> int:
        """The natural c with delta = 1/((c+1)*levels); rejects other deltas."""
        k = self.levels
        c = 1.0 / (self.delta * k) - 1.0
        c_int = round(c)
        if c_int < 1 or abs(c - c_int) > 1e-9 * max(1.0, abs(c)):
            raise NetworkError(
                f"delta={self.delta} is not 1/((c+1)*{k}) for a natural c >= 1"
            )
        return int(c_int)


def _plateau_net(values, rate, c, blocks, inner) -> Network:
    """Deep net constant values[k] on [k/rate, (k+1)/rate - delta].

    Interpolates the plateau data on the notched grid (plateau value at
    each integer point and at the notch ending the plateau), then
    rewires the two-hidden-layer interpolant into a narrow deep net.
    """
    values = np.asarray(values, dtype=np.float64)
    count = values.size
    grid = InequiGrid(rate=rate, count=count, c=c, blocks=blocks, inner=inner)
    y = np.empty(2 * count + 1)
    y[0::2] = np.append(values, values[-1])
    y[1::2] = values
    shallow = build_two_layer_interp(grid, y)
    n1 = 2 * blocks
    l1 = -(-(2 * inner + 1) // n1)  # ceil
    padded = pad_second_hidden(shallow, n1 * l1)
    return widen_to_deep(padded, n1, l1)


def build_step_function(spec: StepSpec) -> Network:
    """Net with value k on [k/K, (k+1)/K - delta] for k = 0..K-1 (K = levels).

    d = 1 composes a coarse step with a refinement step applied to the
    within-plateau remainder; d >= 2 is a single plateau interpolation.
    """
    c = spec.gap_subdivision()
    k_levels = spec.levels
    if spec.d == 1:
        n, l = spec.n, spec.l
        m_coarse = n * n * l
        coarse = _plateau_net(
            np.arange(m_coarse, dtype=np.float64),
            rate=float(m_coarse),
            c=(c + 1) * l - 1,
            blocks=n,
            inner=2 * n * l - 1,
        )
        fine = _plateau_net(
            np.arange(l, dtype=np.float64),
            rate=float(m_coarse * l),
            c=c,
            blocks=1,
            inner=2 * l - 1,
        )
        carry = identity_channel(1, coarse.depth)
        front = compose_parallel([carry, coarse])  # (x, coarse(x))
        remap = affine_net([[1.0, -1.0 / m_coarse], [0.0, 1.0]])
        stage = compose_serial(front, remap)  # (x - coarse/M, coarse)
        back = compose_stack([fine, identity_channel(1, fine.depth)])
        net = compose_serial(stage, back)  # (fine(.), coarse)
        return apply_output_affine(net, [[1.0, float(l)]])
    root_n = int(math.floor(spec.n ** (1.0 / spec.d)))
    root_l = int(math.floor(spec.l ** (2.0 / spec.d)))
    return _plateau_net(
        np.arange(k_levels, dtype=np.float64),
        rate=float(k_levels),
        c=c,
        blocks=root_n,
        inner=2 * root_n * root_l - 1,
    )


def build_pow2_multiplier(l: int) -> Network:
    """Width-2, depth l+1 net computing x -> 2^l * x on all of R.

    Splits into +-channels, doubles l-1 times, recombines with weight 2;
    every stored parameter has absolute value at most 2.
    """
    if l < 1:
        raise NetworkError("l must be >= 1")
    split = AffineLayer(np.array([[1.0], [-1.0]]), np.zeros(2), RELU)
    double = AffineLayer(2.0 * np.eye(2), np.zeros(2), RELU)
    merge = AffineLayer(np.array([[2.0, -2.0]]), np.zeros(1), IDENTITY)
    return Network(1, (split,) + (double,) * (l - 1) + (merge,))


def _relu_passthrough() -> Network:
    """Scalar net computing relu(x)."""
    return Network(
        1,
        (
            AffineLayer(np.array([[1.0]]), np.zeros(1), RELU),
            AffineLayer(np.array([[1.0]]), np.zeros(1), IDENTITY),
        ),
    )


def _bit_value_net(bits: np.ndarray, n: int, l: int) -> Network:
    """Net mapping integer m to the real 0.b0 b1 ... b_{l-1} (binary)."""
    m_rows = bits.shape[0]
    reals = bits @ (0.5 ** np.arange(1, l + 1))
    return _plateau_net(reals, rate=1.0, c=1, blocks=n, inner=2 * n * l - 1)


def _extract_step(j: int, l: int, exponential_variant: bool) -> Network:
    """One digit-extraction round on state (xi, t, acc).

    Computes u = 2^l (xi - 1/2), digit = relu(u+1) - relu(u), the gate
    1{j <= t}, and updates (xi, acc) <- (2 xi - digit, acc + digit*gate).
    """
    if exponential_variant:
        scale = float(2**l)
        head = affine_net(
            [[scale, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            [-scale / 2.0, 0.0, 0.0, 0.0],
        )
        staged = head
    else:
        shift = affine_net(
            [[1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            [-0.5, 0.0, 0.0, 0.0],
        )
        pipe = compose_stack([build_pow2_multiplier(l), identity_channel(3, l + 1)])
        staged = compose_serial(shift, pipe)
    # staged outputs (u, xi, t, acc); all but u are nonnegative
    w_c = np.array(
        [
            [1.0, 0.0, 0.0, 0.0],  # r1 = relu(u + 1)
            [1.0, 0.0, 0.0, 0.0],  # r2 = relu(u)
            [0.0, 1.0, 0.0, 0.0],  # xi
            [0.0, 0.0, 1.0, 0.0],  # t
            [0.0, 0.0, 1.0, 0.0],  # a1 = relu(t - j + 1)
            [0.0, 0.0, 1.0, 0.0],  # a2 = relu(t - j)
            [0.0, 0.0, 0.0, 1.0],  # acc
        ]
    )
    b_c = np.array([1.0, 0.0, 0.0, 0.0, 1.0 - j, -float(j), 0.0])
    w_d = np.array(
        [
            [1.0, -1.0, 0.0, 0.0, 1.0, -1.0, 0.0],  # z = relu(digit + gate - 1)
            [-1.0, 1.0, 2.0, 0.0, 0.0, 0.0, 0.0],  # xi' = relu(2 xi - digit)
            [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],  # t
            [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0],  # acc
        ]
    )
    b_d = np.array([-1.0, 0.0, 0.0, 0.0])
    w_e = np.array([[0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [1.0, 0.0, 0.0, 1.0]])
    tail = Network(
        4,
        (
            AffineLayer(w_c, b_c, RELU),
            AffineLayer(w_d, b_d, RELU),
            AffineLayer(w_e, np.zeros(3), IDENTITY),
        ),
    )
    return compose_serial(staged, tail)


def build_bit_sum(bits, n: int, l: int, exponential_variant: bool = False) -> Network:
    """Net with value sum_{j<=t} bits[m, j] at integer inputs (m, t).

    ``bits`` is a {0,1} matrix with n^2*l rows and l columns.  The bits
    of row m are packed into one real number and recovered digit by
    digit; ``exponential_variant`` swaps the doubling pipeline for a raw
    2^l weight (test-only; demonstrates the parameter blow-up).
    """
    bits = np.asarray(bits, dtype=np.float64)
    if bits.shape != (n * n * l, l):
        raise NetworkError(f"bits must have shape ({n * n * l}, {l}), got {bits.shape}")
    if not np.all((bits == 0) | (bits == 1)):
        raise NetworkError("bits must be 0/1")
    packer = _bit_value_net(bits, n, l)
    front = compose_stack([packer, identity_channel(1, packer.depth)])
    to_state = affine_net(
        [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]], [0.0, 1.0, 0.0]
    )  # (xi, t=input+1, acc=0)
    net = compose_serial(front, to_state)
    for j in range(1, l + 1):
        net = compose_serial(net, _extract_step(j, l, exponential_variant))
    return apply_output_affine(net, [[0.0, 0.0, 1.0]])


def build_bit_lookup(flat_bits, n: int, l: int) -> Network:
    """Net with value flat_bits[i] at every integer 0 <= i < n^2*l^2.

    Splits the index as i = m*l + j, recovers the block m with a step
    net, and differences two prefix-sum nets over shifted bit matrices.
    """
    theta = np.asarray(flat_bits, dtype=np.float64)
    m_rows = n * n * l
    if theta.size != m_rows * l:
        raise NetworkError(f"expected {m_rows * l} bits, got {theta.size}")
    a = theta.reshape(m_rows, l)
    b = np.zeros_like(a)
    b[:, 1:] = a[:, :-1]
    sum_a = build_bit_sum(a, n, l)
    sum_b = build_bit_sum(b, n, l)
    if l == 1:
        block = identity_channel(1, 2)
    else:
        block = _plateau_net(
            np.arange(m_rows, dtype=np.float64),
            rate=1.0 / l,
            c=l - 1,
            blocks=n,
            inner=2 * n * l - 1,
        )
    front = compose_parallel([identity_channel(1, block.depth), block])  # (i, m)
    remap = affine_net([[0.0, 1.0], [1.0, -float(l)]])  # (m, i - l*m)
    staged = compose_serial(front, remap)
    pair = compose_parallel([sum_a, sum_b])
    return apply_output_affine(compose_serial(staged, pair), [[1.0, -1.0]])


def point_fitter_precision(n: int, l: int, s: int) -> int:
    """Number of binary planes: ceil(2 s log2(n*l + 1))."""
    return math.ceil(2 * s * math.log2(n * l + 1))


def build_point_fitter(xi, n: int, l: int, s: int = 1) -> Network:
    """Net with |value(i) - xi[i]| <= (n*l)^(-2s) at integers i, output in [0,1].

    Truncates each target to J = ceil(2 s log2(n*l+1)) binary digits,
    looks each digit plane up with ``build_bit_lookup``, sums the planes
    with weights 2^-j, and clamps the result to [0, 1].
    """
    xi = np.asarray(xi, dtype=np.float64)
    if xi.size != n * n * l * l:
        raise NetworkError(f"expected {n * n * l * l} targets, got {xi.size}")
    if np.any(xi < 0) or np.any(xi > 1):
        raise NetworkError("targets must lie in [0, 1]")
    if s < 1:
        raise NetworkError("s must be >= 1")
    planes = point_fitter_precision(n, l, s)
    if planes > 50:
        raise NetworkError(
            f"requested precision needs {planes} > 50 binary planes (binary64 guard)"
        )
    quantized = np.minimum(np.floor(xi * 2.0**planes), 2.0**planes - 1).astype(np.int64)
    lookups = []
    coeffs = []
    for j in range(1, planes + 1):
        plane = (quantized >> (planes - j)) & 1
        lookups.append(build_bit_lookup(plane.astype(np.float64), n, l))
        coeffs.append(0.5**j)
    approx = lookups[0] if len(lookups) == 1 else compose_parallel(lookups)
    summed = apply_output_affine(approx, np.asarray(coeffs).reshape(1, -1))
    clamp = Network(
        1,
        (
            AffineLayer(np.array([[1.0], [1.0]]), np.array([0.0, -1.0]), RELU),
            AffineLayer(np.array([[1.0, -1.0]]), np.zeros(1), IDENTITY),
        ),
    )
    return compose_serial(summed, clamp)


def tooth_count(n: int) -> int:
    """The unique k with (k-1)*2^(k-1) + 1 <= n <= k*2^k."""
    if n < 1:
        raise NetworkError("n must be >= 1")
    k = 1
    while k * 2**k < n:
        k += 1
    return k


def _tooth_targets(i: int, k: int) -> np.ndarray:
    """Values of the i-th sawtooth on the dyadic grid j/2^k, j = 0..2^k."""
    j = np.arange(2**k + 1)
    pos = j / 2.0 ** (k - i)  # position in half-periods
    return 1.0 - np.abs(np.mod(pos, 2.0) - 1.0)


def build_square(n: int, l: int) -> Network:
    """Approximate x -> x^2 on [0, 1] with sup error at most n^(-l).

    One hidden layer holds the dyadic kinks of the first k sawtooth
    waves; each further layer applies the order-k wave once more and
    accumulates the scaled teeth, so l layers realize l*k teeth total.
    """
    if n < 1 or l < 1:
        raise NetworkError("n and l must be >= 1")
    k = tooth_count(n)
    units = 2**k
    grid = np.arange(units) / units
    rows = np.array([equi_weights(float(units), _tooth_targets(i, k)) for i in range(1, k + 1)])
    w_top = rows[-1]  # order-k wave over the shared units

    first = AffineLayer(
        np.vstack([np.ones((units, 1)), [[1.0]]]),
        np.concatenate([-grid, [0.0]]),
        RELU,
    )
    layers = [first]
    for b in range(1, l):
        w = np.zeros((units + 2, units + 2 if b > 1 else units + 1))
        bvec = np.zeros(units + 2)
        w[:units, :units] = np.outer(np.ones(units), w_top)
        bvec[:units] = -grid
        w[units, units] = 1.0  # x carry
        scale = 4.0 ** (-(b - 1) * k) * (0.25 ** np.arange(1, k + 1))
        w[units + 1, :units] = scale @ rows  # teeth of block b-1
        if b > 1:
            w[units + 1, units + 1] = 1.0  # running sum
        layers.append(AffineLayer(w, bvec, RELU))
    out_w = np.zeros((1, units + 2 if l > 1 else units + 1))
    scale = 4.0 ** (-(l - 1) * k) * (0.25 ** np.arange(1, k + 1))
    out_w[0, :units] = -(scale @ rows)
    out_w[0, units] = 1.0
    if l > 1:
        out_w[0, units + 1] = -1.0
    layers.append(AffineLayer(out_w, np.zeros(1), IDENTITY))
    return Network(1, tuple(layers))


def build_product_unit(n: int, l: int) -> Network:
    """Approximate (x, y) -> x*y on [0,1]^2 via the polarization identity."""
    sq = build_square(n, l)
    pre = affine_net([[0.5, 0.5], [0.5, 0.0], [0.0, 0.5]])
    trio = compose_serial(pre, compose_stack([sq, sq, sq]))
    return apply_output_affine(trio, [[2.0, -2.0, -2.0]])


def build_product_general(n: int, l: int, a: float, b: float) -> Network:
    """Approximate (x, y) -> x*y on [a, b]^2 by rescaling the unit product."""
    if not (a < b):
        raise NetworkError("need a < b")
    span = b - a
    unit = build_product_unit(n, l)
    pre = affine_net(
        [[1.0 / span, 0.0], [0.0, 1.0 / span]], [-a / span, -a / span]
    )
    scaled = compose_serial(pre, unit)
    gate = compose_serial(
        affine_net([[1.0, 1.0]], [2.0 * abs(a)]), _relu_passthrough()
    )
    both = compose_parallel([scaled, gate])
    return apply_output_affine(
        both, [[span * span, a]], [-a * a - 2.0 * a * abs(a)]
    )


def build_multi_product(k: int, n: int, l: int) -> Network:
    """Approximate x_1 * ... * x_k on [0,1]^k by folding the binary product."""
    if k < 2:
        raise NetworkError("k must be >= 2")
    net = build_product_unit(n, l)
    for _ in range(3, k + 1):
        widened = compose_stack([net, _relu_passthrough()])
        net = compose_serial(widened, build_product_unit(n, l))
    return net


def build_monomial(alpha, n: int, l: int) -> Network:
    """Approximate x -> x^alpha on [0,1]^d (alpha a tuple of naturals).

    The input is replicated entrywise according to alpha (padding with
    constant ones), then folded through the multi-product net; every
    nonzero entry of the replication map equals 1.
    """
    alpha = tuple(int(a) for a in alpha)
    if any(a < 0 for a in alpha):
        raise NetworkError("alpha entries must be nonnegative")
    d = len(alpha)
    total = sum(alpha)
    if total == 0:
        return affine_net(np.zeros((1, d)), [1.0])
    k_in = max(total, 2)
    rep = np.zeros((k_in, d))
    bias = np.zeros(k_in)
    slot = 0
    for j, mult in enumerate(alpha):
        for _ in range(mult):
            rep[slot, j] = 1.0
            slot += 1
    bias[slot:] = 1.0
    return compose_serial(affine_net(rep, bias), build_multi_product(k_in, n, l))
