"""The two-input example pair and random tiny instances for property testing."""

from __future__ import annotations

import numpy as np

from .model import InputRegion, Network, QuantConfig, QuantizedNetwork, QuantScheme, quantize_network

# the bias format is not fixed by the example; signed 4-bit with 2 fractional bits like the weights
EXAMPLE_SCHEME = QuantScheme.parse("w=±,4,2;b=±,4,2;in=+,4,4;h=+,4,2")
EXAMPLE_CENTER = (9, 6)


def example_network() -> Network:
    return Network(([[1.2, -0.2], [-0.7, 0.8]], [[0.3, 0.7]]), ([0.0, 0.0], [0.0]))


def example_pair() -> tuple[Network, QuantizedNetwork]:
    net = example_network()
    return net, quantize_network(net, EXAMPLE_SCHEME)


def example_region(radius: int) -> InputRegion:
    return InputRegion(EXAMPLE_CENTER, radius, EXAMPLE_SCHEME.input)


def random_scheme(rng: np.random.Generator, bits=(4, 6, 8)) -> QuantScheme:
    q = int(rng.choice(bits))
    q_in = int(rng.choice(bits))
    signed_in = bool(rng.integers(2))
    # inputs use nearly all bits as fraction so that x^ / 2^F_in tracks x^ / span
    f_in = q_in - 1 if signed_in else q_in
    return QuantScheme(
        QuantConfig(True, q, q - 2),
        QuantConfig(True, q, q - 2),
        QuantConfig(signed_in, q_in, f_in),
        QuantConfig(False, q, q - 2),
    )


def random_network(rng: np.random.Generator, widths: list[int], scale: float = 0.8) -> Network:
    ws = [rng.normal(0.0, scale, size=(widths[k + 1], widths[k])) for k in range(len(widths) - 1)]
    bs = [rng.normal(0.0, scale / 3, size=widths[k + 1]) for k in range(len(widths) - 1)]
    return Network(tuple(ws), tuple(bs))


def random_widths(rng: np.random.Generator, max_inputs: int = 3, max_depth: int = 4,
                  max_width: int = 4) -> list[int]:
    """Layer widths with 2 <= len <= max_depth; mostly networks with hidden layers."""
    depth = int(rng.choice(np.arange(2, max_depth + 1), p=_depth_weights(max_depth)))
    n_in = int(rng.integers(1, max_inputs + 1))
    hidden = [int(rng.integers(1, max_width + 1)) for _ in range(depth - 2)]
    n_out = int(rng.integers(1, min(3, max_width) + 1))
    return [n_in] + hidden + [n_out]


def _depth_weights(max_depth: int) -> np.ndarray:
    w = np.array([1.0] + [3.0] * (max_depth - 2))
    return w / w.sum()


def random_instance(rng: np.random.Generator, max_inputs: int = 3, max_depth: int = 4, max_width: int = 4,
                    max_radius: int = 2):
    """(net, qnet, region, target) with every size knob drawn at random."""
    scheme = random_scheme(rng)
    net = random_network(rng, random_widths(rng, max_inputs, max_depth, max_width))
    qnet = quantize_network(net, scheme)
    c = scheme.input
    center = tuple(int(v) for v in rng.integers(c.lb, c.ub + 1, size=net.n_inputs))
    region = InputRegion(center, int(rng.integers(0, max_radius + 1)), c)
    target = int(rng.integers(net.n_outputs))
    return net, qnet, region, target
