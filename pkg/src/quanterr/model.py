"""Networks, fixed-point quantization and the bit-exact forward semantics.

Layer indexing used throughout the package: layer 0 is the input layer, and
``net.weights[k]`` / ``net.biases[k]`` produce layer ``k + 1``.  The last
affine layer is the output layer; every other one is followed by ReLU (DNN)
or round-then-clamp (QNN).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np


class QuantizationError(ValueError):
    """Raised on malformed networks, configurations or regions."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


# --------------------------------------------------------------------------
# Scalar primitives
# --------------------------------------------------------------------------


def clamp(x, a, b):
    if a > b:
        raise ValueError(f"clamp: empty range [{a}, {b}]")
    if x < a:
        return a
    if x > b:
        return b
    return x


def round_nearest(x: float) -> int:
    """Round to the nearest integer, ties away from zero."""
    if not math.isfinite(x):
        raise ValueError(f"round_nearest: non-finite input {x!r}")
    q = math.floor(abs(x) + 0.5)
    return int(q) if x >= 0 else -int(q)


def round_nearest_array(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("round_nearest: non-finite input")
    return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(np.int64)


# --------------------------------------------------------------------------
# Quantization configurations
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class QuantConfig:
    """Fixed-point format <signedness, total bits, fractional bits>."""

    signed: bool
    bits: int
    frac: int

    def __post_init__(self):
        if not 1 <= self.bits <= 32:
            raise QuantizationError(f"bit width must be in [1, 32], got {self.bits}")

    @property
    def lb(self) -> int:
        return -(2 ** (self.bits - 1)) if self.signed else 0

    @property
    def ub(self) -> int:
        return 2 ** (self.bits - 1) - 1 if self.signed else 2**self.bits - 1

    @property
    def sign_symbol(self) -> str:
        return "±" if self.signed else "+"

    def __str__(self) -> str:
        return f"<{self.sign_symbol},{self.bits},{self.frac}>"

    @classmethod
    def parse(cls, text: str) -> "QuantConfig":
        """Parse ``"±,4,2"`` / ``"+:8:8"`` / ``"<+,4,4>"``; ``+-`` and ``s``/``u`` also accepted."""
        body = text.strip().strip("<>()")
        parts = [p for p in body.replace(":", ",").split(",") if p.strip()]
        if len(parts) != 3:
            raise QuantizationError(f"cannot parse quantization config {text!r}")
        sign = parts[0].strip()
        if sign in ("±", "+-", "-", "s", "signed"):
            signed = True
        elif sign in ("+", "u", "unsigned"):
            signed = False
        else:
            raise QuantizationError(f"unknown signedness {sign!r} in {text!r}")
        return cls(signed, int(parts[1]), int(parts[2]))


def quantize_value(x: float, c: QuantConfig) -> int:
    return clamp(round_nearest(2.0**c.frac * x), c.lb, c.ub)


def quantize_array(x: np.ndarray, c: QuantConfig) -> np.ndarray:
    # pre-clip keeps huge values from overflowing int64; saturation is unchanged
    scaled = np.clip(2.0**c.frac * np.asarray(x, dtype=float), c.lb - 1, c.ub + 1)
    return np.clip(round_nearest_array(scaled), c.lb, c.ub)


@dataclass(frozen=True)
class QuantScheme:
    weights: QuantConfig
    bias: QuantConfig
    input: QuantConfig
    hidden: QuantConfig

    def __post_init__(self):
        if self.hidden.signed:
            raise QuantizationError("hidden-layer outputs must use an unsigned configuration")

    @property
    def input_span(self) -> int:
        """Normalization divisor C_in.ub - C_in.lb mapping integer inputs to DNN inputs."""
        return self.input.ub - self.input.lb

    def to_dict(self) -> dict:
        return {
            name: [c.sign_symbol, c.bits, c.frac]
            for name, c in (("weights", self.weights), ("bias", self.bias),
                            ("input", self.input), ("hidden", self.hidden))
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QuantScheme":
        def conf(v):
            if isinstance(v, str):
                return QuantConfig.parse(v)
            return QuantConfig.parse(",".join(str(p) for p in v))

        try:
            return cls(conf(d["weights"]), conf(d["bias"]), conf(d["input"]), conf(d["hidden"]))
        except KeyError as e:
            raise QuantizationError(f"scheme is missing entry {e}") from None

    @classmethod
    def parse(cls, text: str) -> "QuantScheme":
        """Inline form ``w=±,4,2;b=±,4,2;in=+,4,4;h=+,4,2``."""
        keys = {"w": "weights", "b": "bias", "in": "input", "h": "hidden"}
        d = {}
        for item in text.split(";"):
            if not item.strip():
                continue
            k, _, v = item.partition("=")
            k = keys.get(k.strip(), k.strip())
            d[k] = QuantConfig.parse(v)
        return cls.from_dict({k: str(v) for k, v in d.items()})


# --------------------------------------------------------------------------
# Networks
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Network:
    """Real-valued feed-forward ReLU network; hidden layers use ReLU, the last layer is affine."""

    weights: tuple
    biases: tuple

    def __post_init__(self):
        if len(self.weights) == 0 or len(self.weights) != len(self.biases):
            raise QuantizationError("network needs matching, non-empty weight and bias lists")
        ws = tuple(_frozen(np.atleast_2d(np.asarray(w, dtype=float))) for w in self.weights)
        bs = tuple(_frozen(np.atleast_1d(np.asarray(b, dtype=float))) for b in self.biases)
        for k, (w, b) in enumerate(zip(ws, bs)):
            if w.shape[0] != b.shape[0]:
                raise QuantizationError(f"layer {k + 1}: {w.shape[0]} rows but {b.shape[0]} biases")
            if k > 0 and w.shape[1] != ws[k - 1].shape[0]:
                raise QuantizationError(
                    f"layer {k + 1}: expects {w.shape[1]} inputs, previous layer has {ws[k - 1].shape[0]}")
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    @property
    def widths(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def n_inputs(self) -> int:
        return self.weights[0].shape[1]

    @property
    def n_outputs(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def n_affine(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class QuantizedNetwork:
    weights: tuple
    biases: tuple
    scheme: QuantScheme

    def __post_init__(self):
        ws = tuple(_frozen(np.atleast_2d(np.asarray(w, dtype=np.int64))) for w in self.weights)
        bs = tuple(_frozen(np.atleast_1d(np.asarray(b, dtype=np.int64))) for b in self.biases)
        s = self.scheme
        for k, (w, b) in enumerate(zip(ws, bs)):
            if w.size and (w.min() < s.weights.lb or w.max() > s.weights.ub):
                raise QuantizationError(f"layer {k + 1}: weight outside {s.weights}")
            if b.size and (b.min() < s.bias.lb or b.max() > s.bias.ub):
                raise QuantizationError(f"layer {k + 1}: bias outside {s.bias}")
        # reuse the shape checks of Network
        Network(ws, bs)
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    @property
    def widths(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def n_affine(self) -> int:
        return len(self.weights)

    def exponent(self, k: int) -> int:
        """Alignment exponent of affine layer ``k`` (0-based).

        The first affine layer consumes input-format values, later ones
        hidden-format values; both produce values in units of 2^-F_h.
        """
        s = self.scheme
        if k == 0:
            return s.hidden.frac - s.weights.frac - s.input.frac
        return -s.weights.frac

    @property
    def bias_scale(self) -> float:
        return 2.0 ** (self.scheme.hidden.frac - self.scheme.bias.frac)

    def fixed_weights(self, k: int) -> np.ndarray:
        """Fixed-point weights 2^-F_w * W_hat."""
        return self.weights[k] * 2.0 ** (-self.scheme.weights.frac)

    def fixed_bias(self, k: int) -> np.ndarray:
        return self.biases[k] * 2.0 ** (-self.scheme.bias.frac)


def quantize_network(net: Network, scheme: QuantScheme) -> QuantizedNetwork:
    return QuantizedNetwork(
        tuple(quantize_array(w, scheme.weights) for w in net.weights),
        tuple(quantize_array(b, scheme.bias) for b in net.biases),
        scheme,
    )


# --------------------------------------------------------------------------
# Regions and properties
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class InputRegion:
    """L-infinity ball of integer inputs, intersected with the input format's range."""

    center: tuple
    radius: int
    config: QuantConfig

    def __post_init__(self):
        c = tuple(int(v) for v in self.center)
        if self.radius < 0:
            raise QuantizationError("radius must be non-negative")
        for v in c:
            if not self.config.lb <= v <= self.config.ub:
                raise QuantizationError(f"center coordinate {v} outside {self.config}")
        object.__setattr__(self, "center", c)

    @property
    def lower(self) -> np.ndarray:
        return np.array([max(self.config.lb, v - self.radius) for v in self.center], dtype=np.int64)

    @property
    def upper(self) -> np.ndarray:
        return np.array([min(self.config.ub, v + self.radius) for v in self.center], dtype=np.int64)

    @property
    def dim(self) -> int:
        return len(self.center)

    def cardinality(self) -> int:
        return math.prod(int(h - l + 1) for l, h in zip(self.lower, self.upper))

    def __contains__(self, point) -> bool:
        p = np.asarray(point)
        return p.shape == (self.dim,) and bool(np.all(p == np.round(p))) and bool(
            np.all(p >= self.lower) and np.all(p <= self.upper))

    def points(self) -> Iterator[tuple]:
        """Lexicographic iteration over all integer points."""
        ranges = [range(int(l), int(h) + 1) for l, h in zip(self.lower, self.upper)]
        return itertools.product(*ranges)

    def point_array(self, start: int = 0, stop: int | None = None) -> np.ndarray:
        """Points ``start..stop`` of the lexicographic order as an (N, n) array."""
        lo, hi = self.lower, self.upper
        sizes = (hi - lo + 1).astype(np.int64)
        total = self.cardinality()
        stop = total if stop is None else min(stop, total)
        idx = np.arange(start, stop, dtype=np.int64)
        out = np.empty((len(idx), self.dim), dtype=np.int64)
        for j in range(self.dim - 1, -1, -1):
            out[:, j] = lo[j] + idx % sizes[j]
            idx = idx // sizes[j]
        return out


@dataclass(frozen=True)
class Property:
    """|2^-F_h QNN(x)_g - DNN(x / span)_g| < epsilon for every x in the region."""

    net: Network
    qnet: QuantizedNetwork
    region: InputRegion
    target: int
    epsilon: float

    def __post_init__(self):
        if not 0 <= self.target < self.net.n_outputs:
            raise QuantizationError(f"class {self.target} out of range")
        if not self.epsilon > 0:
            raise QuantizationError("epsilon must be positive")


def check_pair(net: Network, qnet: QuantizedNetwork) -> None:
    if net.widths != qnet.widths:
        raise QuantizationError(f"network shapes differ: {net.widths} vs {qnet.widths}")


# --------------------------------------------------------------------------
# Forward semantics
# --------------------------------------------------------------------------


@dataclass
class Trace:
    """Per-layer values of a batched forward pass.

    ``pre[k]`` / ``post[k]`` hold layer ``k`` before and after the activation
    (for the QNN, ``pre`` is after rounding and before clamping); both have
    shape (N, width).  Layer 0 is the input.
    """

    pre: list = field(default_factory=list)
    post: list = field(default_factory=list)


def _as_batch(x, n: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != n:
        raise QuantizationError(f"expected input of width {n}, got {x.shape[1]}")
    return x, single


def dnn_trace(net: Network, x) -> Trace:
    x, _ = _as_batch(np.asarray(x, dtype=float), net.n_inputs)
    t = Trace([x], [x])
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        # einsum keeps each row's summation order independent of the batch size
        pre = np.einsum("ni,ji->nj", x, w) + b
        x = pre if k == net.n_affine - 1 else np.maximum(pre, 0.0)
        t.pre.append(pre)
        t.post.append(x)
    return t


def dnn_forward(net: Network, x) -> np.ndarray:
    single = np.asarray(x).ndim == 1
    out = dnn_trace(net, x).post[-1]
    return out[0] if single else out


def _check_input_range(qnet: QuantizedNetwork, x: np.ndarray) -> None:
    c = qnet.scheme.input
    if x.size and (x.min() < c.lb or x.max() > c.ub):
        raise QuantizationError(f"quantized input outside {c}")
    if np.any(x != np.round(x)):
        raise QuantizationError("quantized input must be integral")


def qnn_trace(qnet: QuantizedNetwork, x) -> Trace:
    """Forward pass of the QNN; hidden values are integers in [0, C_h.ub], outputs in 2^-F_h units."""
    x, _ = _as_batch(x, qnet.widths[0])
    _check_input_range(qnet, x)
    x = x.astype(np.int64)
    cub = qnet.scheme.hidden.ub
    t = Trace([x], [x])
    last = qnet.n_affine - 1
    for k, (w, b) in enumerate(zip(qnet.weights, qnet.biases)):
        # integer products are exact; scaling by powers of two stays exact in float64
        z = (x @ w.T) * 2.0 ** qnet.exponent(k) + qnet.bias_scale * b
        if k == last:
            t.pre.append(z)
            t.post.append(z)
            break
        pre = round_nearest_array(z)
        x = np.clip(pre, 0, cub)
        t.pre.append(pre)
        t.post.append(x)
    return t


def qnn_forward(qnet: QuantizedNetwork, x) -> np.ndarray:
    single = np.asarray(x).ndim == 1
    out = qnn_trace(qnet, x).post[-1]
    return out[0] if single else out


def dequantize_input(qnet: QuantizedNetwork, x) -> np.ndarray:
    """DNN input corresponding to integer input ``x``: x / (C_in.ub - C_in.lb)."""
    return np.asarray(x, dtype=float) / qnet.scheme.input_span


def quantization_error(net: Network, qnet: QuantizedNetwork, x, g: int):
    """Signed error 2^-F_h QNN(x)_g - DNN(x / span)_g (vectorized over a batch of inputs)."""
    y_hat = qnn_forward(qnet, x)
    y = dnn_forward(net, dequantize_input(qnet, x))
    return 2.0 ** (-qnet.scheme.hidden.frac) * y_hat[..., g] - y[..., g]


def weight_only_forward(qnet: QuantizedNetwork, x) -> np.ndarray:
    """Diagnostic forward with fixed-point parameters and input but real-valued activations.

    No rounding or clamping of hidden values; the result is in real units.
    """
    h = np.atleast_2d(np.asarray(x, dtype=float)) * 2.0 ** (-qnet.scheme.input.frac)
    for k in range(qnet.n_affine):
        h = np.einsum("ni,ji->nj", h, qnet.fixed_weights(k)) + qnet.fixed_bias(k)
        if k < qnet.n_affine - 1:
            h = np.maximum(h, 0.0)
    return h[0] if np.asarray(x).ndim == 1 else h


def predicted_class(net: Network, qnet: QuantizedNetwork, center: Sequence[int]) -> int:
    """argmax of the DNN at the dequantized center; ties go to the lowest index."""
    return int(np.argmax(dnn_forward(net, dequantize_input(qnet, center))))
