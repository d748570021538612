"""Composition calculus for ReLU networks.

Serial/parallel composition, linear combinations, exact identity
channels, min/max/median gadgets, and the rewiring that trades a wide
second hidden layer for depth.  All constructors are pure and return
canonical networks (ReLU hidden layers, affine output layer).

Depth bookkeeping counts affine maps: serial composition merges the
boundary pair (upstream output map, downstream input map) into a single
affine map, so depth(a o b) = depth(a) + depth(b) - 1.
"""

from __future__ import annotations

import numpy as np

from .netcore import (
    IDENTITY,
    RELU,
    AffineLayer,
    DimensionError,
    Network,
    NetworkError,
)


def affine_net(weights, bias=None) -> Network:
    """Depth-1 network realizing the affine map x -> W x + b."""
    w = np.atleast_2d(np.asarray(weights, dtype=np.float64))
    b = np.zeros(w.shape[0]) if bias is None else np.asarray(bias, dtype=np.float64)
    return Network(w.shape[1], (AffineLayer(w, b, IDENTITY),))


def identity_net(dim: int) -> Network:
    """Depth-1 identity map (single affine layer W=I, b=0)."""
    return affine_net(np.eye(dim))


def identity_channel(dim: int, depth: int) -> Network:
    """Exact identity on R^dim at a prescribed depth.

    Uses the paired-channel trick relu(x) - relu(-x) = x so negative
    inputs survive; every parameter is in {-1, 0, 1} and the hidden
    width is 2*dim.
    """
    if dim < 1 or depth < 1:
        raise NetworkError("identity_channel needs dim >= 1 and depth >= 1")
    if depth == 1:
        return identity_net(dim)
    eye = np.eye(dim)
    split = AffineLayer(np.vstack([eye, -eye]), np.zeros(2 * dim), RELU)
    carry = AffineLayer(np.eye(2 * dim), np.zeros(2 * dim), RELU)
    merge = AffineLayer(np.hstack([eye, -eye]), np.zeros(dim), IDENTITY)
    return Network(dim, (split,) + (carry,) * (depth - 2) + (merge,))


def compose_serial(a: Network, b: Network) -> Network:
    """b after a; the boundary affine maps are merged into one layer."""
    if a.out_dim != b.input_dim:
        raise DimensionError(
            f"serial composition: {a.out_dim} outputs feed {b.input_dim} inputs"
        )
    if a.layers[-1].activation != IDENTITY:
        raise NetworkError("upstream network must end in an affine output layer")
    out = a.layers[-1]
    first = b.layers[0]
    merged = AffineLayer(
        first.weights @ out.weights,
        first.weights @ out.bias + first.bias,
        first.activation,
    )
    return Network(a.input_dim, a.layers[:-1] + (merged,) + b.layers[1:])


def pad_to_depth(net: Network, depth: int) -> Network:
    """Append identity channels so the network reaches the given depth."""
    if depth < net.depth:
        raise NetworkError(f"cannot pad depth {net.depth} down to {depth}")
    if depth == net.depth:
        return net
    return compose_serial(net, identity_channel(net.out_dim, depth - net.depth + 1))


def compose_parallel(nets) -> Network:
    """Run networks side by side on a shared input; outputs concatenate.

    Operands of unequal depth are first padded with identity channels.
    """
    nets = list(nets)
    if not nets:
        raise NetworkError("compose_parallel of an empty sequence")
    dim = nets[0].input_dim
    if any(n.input_dim != dim for n in nets):
        raise DimensionError("parallel operands must share input_dim")
    if len(nets) == 1:
        return nets[0]
    depth = max(n.depth for n in nets)
    nets = [pad_to_depth(n, depth) for n in nets]
    layers = []
    for i in range(depth):
        rows = [n.layers[i] for n in nets]
        act = rows[0].activation
        if any(r.activation != act for r in rows):
            raise NetworkError("parallel operands disagree on activation pattern")
        if i == 0:
            w = np.vstack([r.weights for r in rows])
        else:
            w = _block_diag([r.weights for r in rows])
        b = np.concatenate([r.bias for r in rows])
        layers.append(AffineLayer(w, b, act))
    return Network(dim, tuple(layers))


def compose_stack(nets) -> Network:
    """Run networks side by side on disjoint slices of the input vector."""
    nets = list(nets)
    if not nets:
        raise NetworkError("compose_stack of an empty sequence")
    total = sum(n.input_dim for n in nets)
    padded = []
    offset = 0
    for n in nets:
        proj = np.zeros((n.input_dim, total))
        proj[:, offset : offset + n.input_dim] = np.eye(n.input_dim)
        padded.append(compose_serial(affine_net(proj), n))
        offset += n.input_dim
    return compose_parallel(padded)


def apply_output_affine(net: Network, weights, bias=None) -> Network:
    """Post-multiply the affine output layer: y -> A y + c, depth unchanged."""
    a = np.atleast_2d(np.asarray(weights, dtype=np.float64))
    c = np.zeros(a.shape[0]) if bias is None else np.asarray(bias, dtype=np.float64)
    last = net.layers[-1]
    if last.activation != IDENTITY:
        raise NetworkError("network must end in an affine output layer")
    if a.shape[1] != net.out_dim:
        raise DimensionError("output transform width mismatch")
    merged = AffineLayer(a @ last.weights, a @ last.bias + c, IDENTITY)
    return Network(net.input_dim, net.layers[:-1] + (merged,))


def linear_combination(nets, coeffs, bias: float = 0.0) -> Network:
    """sum_i coeffs[i] * nets[i](x) + bias for scalar-output operands."""
    nets = list(nets)
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if len(nets) != coeffs.size:
        raise DimensionError("one coefficient per operand required")
    if any(n.out_dim != 1 for n in nets):
        raise NetworkError("linear_combination needs scalar-output operands")
    stacked = compose_parallel(nets)
    return apply_output_affine(stacked, coeffs.reshape(1, -1), np.array([bias]))


def max2() -> Network:
    """Exact max of two reals; all parameters bounded by 1."""
    return _pairwise_net(np.array([0.5, -0.5, 0.5, 0.5]))


def min2() -> Network:
    """Exact min of two reals; all parameters bounded by 1."""
    return _pairwise_net(np.array([0.5, -0.5, -0.5, -0.5]))


def _pairwise_net(out_row: np.ndarray) -> Network:
    # hidden pre-activations: x+y, -x-y, x-y, -x+y
    w1 = np.array([[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])
    hidden = AffineLayer(w1, np.zeros(4), RELU)
    out = AffineLayer(out_row.reshape(1, 4), np.zeros(1), IDENTITY)
    return Network(2, (hidden, out))


def _fold_pairwise(gadget: Network) -> Network:
    """Apply a binary gadget to inputs (x1, x2, x3) as g(x1, g(x2, x3))."""
    inner = compose_serial(affine_net([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]), gadget)
    keep_x1 = compose_serial(affine_net([[1.0, 0.0, 0.0]]), identity_channel(1, inner.depth))
    return compose_serial(compose_parallel([keep_x1, inner]), gadget)


def max3() -> Network:
    return _fold_pairwise(max2())


def min3() -> Network:
    return _fold_pairwise(min2())


def mid3() -> Network:
    """Exact median of three reals: x1+x2+x3 - max - min, parameters <= 1."""
    top = max3()
    bottom = min3()
    total = compose_serial(affine_net([[1.0, 1.0, 1.0]]), identity_channel(1, top.depth))
    return linear_combination([total, top, bottom], [1.0, -1.0, -1.0])


def pad_second_hidden(net: Network, width: int) -> Network:
    """Grow the second hidden layer of a depth-3 net to `width` dead units."""
    if net.depth != 3:
        raise NetworkError("expected exactly two hidden layers")
    l1, l2, l3 = net.layers
    extra = width - l2.out_dim
    if extra < 0:
        raise NetworkError("second hidden layer already wider than target")
    if extra == 0:
        return net
    w2 = np.vstack([l2.weights, np.zeros((extra, l2.in_dim))])
    b2 = np.concatenate([l2.bias, np.zeros(extra)])
    w3 = np.hstack([l3.weights, np.zeros((l3.out_dim, extra))])
    return Network(
        net.input_dim,
        (l1, AffineLayer(w2, b2, l2.activation), AffineLayer(w3, l3.bias, l3.activation)),
    )


def widen_to_deep(shallow: Network, n: int, l: int) -> Network:
    """Rewire a two-hidden-layer net of widths (n, n*l) into width O(n), depth O(l).

    The shallow net computes W3 relu(W2 relu(W1 x + b1) + b2) + b3 with a
    scalar output.  The deep net carries channels [g | h_i | relu(s) |
    relu(-s)] where g is the first hidden layer output (nonnegative, so
    it passes through later ReLUs unchanged), h_i is the i-th slice of
    the second hidden layer, and s accumulates the partial output sums.
    Pointwise equal to the input network; parameters of the result are
    entries of the original ones plus coupling constants +-1.
    """
    if shallow.depth != 3:
        raise NetworkError("widen_to_deep expects exactly two hidden layers")
    l1, l2, l3 = shallow.layers
    if l1.activation != RELU or l2.activation != RELU or l3.activation != IDENTITY:
        raise NetworkError("widen_to_deep expects canonical relu/relu/identity layers")
    if l1.out_dim != n or l2.out_dim != n * l:
        raise NetworkError(
            f"hidden widths ({l1.out_dim}, {l2.out_dim}) != required ({n}, {n * l})"
        )
    if l3.out_dim != 1:
        raise NetworkError("widen_to_deep expects a scalar output")
    w2 = [l2.weights[i * n : (i + 1) * n] for i in range(l)]
    b2 = [l2.bias[i * n : (i + 1) * n] for i in range(l)]
    w3 = [l3.weights[0, i * n : (i + 1) * n] for i in range(l)]
    eye = np.eye(n)

    layers = [l1]
    # g -> [g, h_1]
    layers.append(
        AffineLayer(
            np.vstack([eye, w2[0]]), np.concatenate([np.zeros(n), b2[0]]), RELU
        )
    )
    for i in range(2, l + 1):
        # input channels: [g, h_{i-1}] (i == 2) or [g, h_{i-1}, relu(s), relu(-s)]
        in_dim = 2 * n if i == 2 else 2 * n + 2
        w = np.zeros((2 * n + 2, in_dim))
        b = np.zeros(2 * n + 2)
        w[:n, :n] = eye
        w[n : 2 * n, :n] = w2[i - 1]
        b[n : 2 * n] = b2[i - 1]
        w[2 * n, n : 2 * n] = w3[i - 2]
        w[2 * n + 1, n : 2 * n] = -w3[i - 2]
        if i > 2:
            w[2 * n, 2 * n] = 1.0
            w[2 * n, 2 * n + 1] = -1.0
            w[2 * n + 1, 2 * n] = -1.0
            w[2 * n + 1, 2 * n + 1] = 1.0
        layers.append(AffineLayer(w, b, RELU))
    in_dim = 2 * n if l == 1 else 2 * n + 2
    w_out = np.zeros((1, in_dim))
    w_out[0, n : 2 * n] = w3[l - 1]
    if l > 1:
        w_out[0, 2 * n] = 1.0
        w_out[0, 2 * n + 1] = -1.0
    layers.append(AffineLayer(w_out, l3.bias.copy(), IDENTITY))
    return Network(shallow.input_dim, tuple(layers))


def _block_diag(blocks) -> np.ndarray:
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols))
    r = c = 0
    for b in blocks:
        out[r : r + b.shape[0], c : c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out
