"""Core representation of fully connected feed-forward ReLU networks.

A network is a chain of affine layers, each tagged with an activation
("relu" or "identity").  Evaluation applies the affine maps in order and
the activation after every map.  The canonical form produced by all
constructors in this package has ReLU on every layer except the last,
which is always an identity (pure affine) output layer.  The container
itself only enforces shape/finiteness invariants, so that generic layer
patterns (e.g. an identity passthrough prepended in a test) remain
evaluable.

All arithmetic is binary64.  Networks are immutable after construction;
``evaluate`` and ``profile`` are pure and safe for concurrent use.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

RELU = "relu"
IDENTITY = "identity"

_ACTIVATIONS = (RELU, IDENTITY)


class NetworkError(ValueError):
    """Base class for network construction/IO errors."""


class DimensionError(NetworkError):
    """Input or layer dimensions do not chain."""


class ParseError(NetworkError):
    """Malformed serialized network document."""


@dataclass(frozen=True)
class AffineLayer:
    """One affine map ``z -> act(W z + b)``.

    ``weights`` has shape (out_dim, in_dim); ``bias`` has length out_dim.
    """

    weights: np.ndarray
    bias: np.ndarray
    activation: str = RELU

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 2:
            raise DimensionError("weights must be a 2-d matrix")
        if b.ndim != 1 or b.shape[0] != w.shape[0]:
            raise DimensionError(
                f"bias length {b.shape} does not match weight rows {w.shape[0]}"
            )
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise NetworkError("non-finite entry in layer parameters")
        if self.activation not in _ACTIVATIONS:
            raise NetworkError(f"unknown activation {self.activation!r}")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class Network:
    """A feed-forward network: input dimension plus an ordered layer chain."""

    input_dim: int
    layers: tuple[AffineLayer, ...] = field(default_factory=tuple)

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise NetworkError("a network needs at least one affine layer")
        if self.input_dim < 1:
            raise DimensionError("input_dim must be >= 1")
        prev = self.input_dim
        for i, layer in enumerate(layers):
            if layer.in_dim != prev:
                raise DimensionError(
                    f"layer {i}: expects input dim {layer.in_dim}, got {prev}"
                )
            prev = layer.out_dim
        object.__setattr__(self, "layers", layers)

    @property
    def depth(self) -> int:
        """Number of affine maps."""
        return len(self.layers)

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def is_canonical(self) -> bool:
        """True when all hidden layers are ReLU and the output layer is affine."""
        return self.layers[-1].activation == IDENTITY and all(
            layer.activation == RELU for layer in self.layers[:-1]
        )


@dataclass(frozen=True)
class NetworkProfile:
    """Size/parameter summary of one realization.

    ``param_sup`` is the max absolute value over all stored weights and
    biases.  It witnesses an upper bound for the minimal realizing
    parameter norm; no minimization over realizations is attempted.
    """

    width: int
    depth: int
    param_sup: float
    nonzero_weights: int


def evaluate(net: Network, x) -> np.ndarray:
    """Apply the network to one input vector."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.shape != (net.input_dim,):
        raise DimensionError(f"expected input of length {net.input_dim}, got {v.shape}")
    for layer in net.layers:
        v = layer.weights @ v + layer.bias
        if layer.activation == RELU:
            np.maximum(v, 0.0, out=v)
    return v


def evaluate_batch(net: Network, xs) -> np.ndarray:
    """Apply the network to a batch of inputs, shape (n_points, input_dim)."""
    v = np.asarray(xs, dtype=np.float64)
    if v.ndim != 2 or v.shape[1] != net.input_dim:
        raise DimensionError(
            f"expected batch of shape (*, {net.input_dim}), got {v.shape}"
        )
    for layer in net.layers:
        v = v @ layer.weights.T + layer.bias
        if layer.activation == RELU:
            np.maximum(v, 0.0, out=v)
    return v


def profile(net: Network) -> NetworkProfile:
    """Width/depth/parameter summary of the stored realization."""
    hidden_dims = [layer.out_dim for layer in net.layers[:-1]]
    width = max(hidden_dims) if hidden_dims else net.layers[-1].out_dim
    sup = 0.0
    nnz = 0
    for layer in net.layers:
        sup = max(sup, float(np.max(np.abs(layer.weights))))
        if layer.bias.size:
            sup = max(sup, float(np.max(np.abs(layer.bias))))
        nnz += int(np.count_nonzero(layer.weights))
    return NetworkProfile(width=width, depth=net.depth, param_sup=sup, nonzero_weights=nnz)


def to_json(net: Network) -> str:
    """Serialize to the text document format (lossless binary64 round-trip)."""
    doc = {
        "input_dim": net.input_dim,
        "layers": [
            {
                "out_dim": layer.out_dim,
                "in_dim": layer.in_dim,
                "weights": [float(w) for w in layer.weights.ravel(order="C")],
                "bias": [float(b) for b in layer.bias],
                "activation": layer.activation,
            }
            for layer in net.layers
        ],
    }
    return json.dumps(doc, allow_nan=False)


def from_json(text: str) -> Network:
    """Parse the text document format back into a Network."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not a valid network document: {exc}") from exc
    if not isinstance(doc, dict) or "input_dim" not in doc or "layers" not in doc:
        raise ParseError("document must carry input_dim and layers")
    layers = []
    for i, entry in enumerate(doc["layers"]):
        try:
            out_dim = int(entry["out_dim"])
            in_dim = int(entry["in_dim"])
            flat = np.asarray(entry["weights"], dtype=np.float64)
            bias = np.asarray(entry["bias"], dtype=np.float64)
            activation = entry["activation"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"layer {i}: missing or malformed field ({exc})") from exc
        if flat.size != out_dim * in_dim:
            raise ParseError(
                f"layer {i}: weight count {flat.size} != out_dim*in_dim {out_dim * in_dim}"
            )
        if bias.size != out_dim:
            raise ParseError(f"layer {i}: bias length {bias.size} != out_dim {out_dim}")
        if activation not in _ACTIVATIONS:
            raise ParseError(f"layer {i}: unknown activation {activation!r}")
        try:
            layers.append(
                AffineLayer(flat.reshape(out_dim, in_dim), bias, activation)
            )
        except NetworkError as exc:
            raise ParseError(f"layer {i}: {exc}") from exc
    try:
        return Network(int(doc["input_dim"]), tuple(layers))
    except NetworkError as exc:
        raise ParseError(str(exc)) from exc


def save(net: Network, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(to_json(net))


def load(path) -> Network:
    with open(path, "r", encoding="utf-8") as fh:
        return from_json(fh.read())
