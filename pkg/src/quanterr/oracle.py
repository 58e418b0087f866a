"""Exact verification by exhaustive enumeration of the integer input region."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .abstract import Box
from .model import (
    InputRegion,
    Network,
    Property,
    QuantizedNetwork,
    check_pair,
    dequantize_input,
    dnn_trace,
    qnn_trace,
)

DEFAULT_CAP = 10**7
_CHUNK = 1 << 16


class CapacityError(RuntimeError):
    def __init__(self, cardinality: int, cap: int):
        super().__init__(f"region has {cardinality} points, above the enumeration cap of {cap}")
        self.cardinality = cardinality
        self.cap = cap


@dataclass
class NeuronRanges:
    """Exact per-neuron ranges over the region, one Box per layer.

    QNN values are in QNN units (integers on hidden layers); differences are
    2^-F_h * QNN - DNN (2^-F_in on the input layer).
    """

    dnn_pre: list
    dnn_post: list
    qnn_pre: list
    qnn_post: list
    diff_pre: list
    diff_post: list


@dataclass
class OracleResult:
    max_error: float
    min_error: float
    argmax: tuple
    points_evaluated: int
    ranges: NeuronRanges | None = field(default=None, repr=False)

    @property
    def max_abs_error(self) -> float:
        return max(abs(self.max_error), abs(self.min_error))


class _RangeAcc:
    def __init__(self):
        self.lo: list = []
        self.hi: list = []

    def update(self, layers: list) -> None:
        if not self.lo:
            self.lo = [a.min(axis=0) for a in layers]
            self.hi = [a.max(axis=0) for a in layers]
            return
        for k, a in enumerate(layers):
            self.lo[k] = np.minimum(self.lo[k], a.min(axis=0))
            self.hi[k] = np.maximum(self.hi[k], a.max(axis=0))

    def boxes(self) -> list:
        return [Box(lo, hi) for lo, hi in zip(self.lo, self.hi)]


def enumerate_errors(net: Network, qnet: QuantizedNetwork, region: InputRegion, g: int,
                     cap: int = DEFAULT_CAP, ranges: bool = False) -> OracleResult:
    """Signed error extrema of class ``g`` over every region point (lexicographic order).

    ``argmax`` is the first point reaching the largest absolute error.
    """
    check_pair(net, qnet)
    if not 0 <= g < net.n_outputs:
        raise ValueError(f"class {g} out of range")
    total = region.cardinality()
    if total > cap:
        raise CapacityError(total, cap)
    h = 2.0 ** -qnet.scheme.hidden.frac
    fin = 2.0 ** -qnet.scheme.input.frac
    best_abs, best_idx = -1.0, 0
    emax, emin = -np.inf, np.inf
    accs = [_RangeAcc() for _ in range(6)] if ranges else None
    for start in range(0, total, _CHUNK):
        pts = region.point_array(start, start + _CHUNK)
        qt = qnn_trace(qnet, pts)
        dt = dnn_trace(net, dequantize_input(qnet, pts))
        err = h * qt.post[-1][:, g] - dt.post[-1][:, g]
        emax, emin = max(emax, err.max()), min(emin, err.min())
        a = np.abs(err)
        i = int(np.argmax(a))
        if a[i] > best_abs:
            best_abs, best_idx = float(a[i]), start + i
        if accs is not None:
            scale = [fin] + [h] * (len(qt.pre) - 1)
            accs[0].update(dt.pre)
            accs[1].update(dt.post)
            accs[2].update(qt.pre)
            accs[3].update(qt.post)
            accs[4].update([c * q - d for c, q, d in zip(scale, qt.pre, dt.pre)])
            accs[5].update([c * q - d for c, q, d in zip(scale, qt.post, dt.post)])
    argmax = tuple(int(v) for v in region.point_array(best_idx, best_idx + 1)[0])
    nr = NeuronRanges(*(acc.boxes() for acc in accs)) if accs is not None else None
    return OracleResult(float(emax), float(emin), argmax, total, nr)


@dataclass
class OracleVerdict:
    status: str  # "Proved" or "Falsified"
    result: OracleResult

    @property
    def witness(self) -> tuple | None:
        return self.result.argmax if self.status == "Falsified" else None


def verify_by_enumeration(prop: Property, cap: int = DEFAULT_CAP) -> OracleVerdict:
    res = enumerate_errors(prop.net, prop.qnet, prop.region, prop.target, cap=cap)
    return OracleVerdict("Proved" if res.max_abs_error < prop.epsilon else "Falsified", res)
