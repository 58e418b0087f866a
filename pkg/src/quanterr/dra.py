"""Differential reachability analysis.

Bounds the per-neuron difference 2^-F_h * (QNN value) - (DNN value) layer by
layer.  All difference intervals are kept in real (aligned) units: QNN
integer intervals are scaled by 2^-F_in on the input layer and by 2^-F_h
everywhere else before they meet DNN quantities.

Three variants are provided:

* ``interval``: forward propagation with the affine and activation
  difference transformers over concrete neuron intervals;
* ``symbolic``: affine differences computed from the input-substituted
  polyhedral forms of both networks, activations as above;
* ``naive``: independent analyses of both networks and interval subtraction.

``combine`` intersects two sound results; it is plumbing on top of the
analyses, not an analysis of its own.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .abstract import (
    Box,
    analyze_dnn,
    analyze_qnn_concrete,
    analyze_qnn_symbolic,
    dnn_input_box,
    interval_dot,
    region_box,
)
from .model import InputRegion, Network, QuantizedNetwork, check_pair

METHODS = ("interval", "symbolic", "naive")

# a floating-point inversion of at most this width is collapsed instead of reported
_EMPTY_TOL = 1e-9


class SoundnessError(RuntimeError):
    """An activation transformer produced an empty interval; indicates a bug."""


class UnsupportedConfiguration(ValueError):
    pass


@dataclass(frozen=True)
class DiffInterval:
    lb: float
    ub: float

    def __post_init__(self):
        if not self.lb <= self.ub:
            raise ValueError(f"empty difference interval [{self.lb}, {self.ub}]")

    def __iter__(self):
        return iter((self.lb, self.ub))

    def contains(self, v: float, tol: float = 0.0) -> bool:
        return self.lb - tol <= v <= self.ub + tol

    @property
    def width(self) -> float:
        return self.ub - self.lb


@dataclass
class DraResult:
    """Per-layer difference intervals of one analysis run.

    ``delta_in[k]`` / ``delta[k]`` bound layer ``k`` before / after the
    activation (``delta_in[0]`` is None, ``delta[0]`` is the input layer;
    for the output layer both coincide).  ``dnn`` and ``qnn`` are the neuron
    intervals the run used, the latter in QNN units.
    """

    method: str
    delta_in: list
    delta: list
    dnn: list
    qnn: list

    @property
    def output(self) -> Box:
        return self.delta[-1]

    def interval(self, k: int, j: int, pre: bool = False) -> DiffInterval:
        b = self.delta_in[k] if pre else self.delta[k]
        return DiffInterval(float(b.lo[j]), float(b.hi[j]))

    def verdict(self, g: int, epsilon: float) -> str:
        lb, ub = self.output[g]
        return "Proved" if lb > -epsilon and ub < epsilon else "Unknown"


# --------------------------------------------------------------------------
# Transformers
# --------------------------------------------------------------------------


def aff_trs(w, w_fixed, delta_b, s_prev: Box, d_prev: Box, xi: float) -> tuple:
    """Difference bounds of affine rows.

    ``w``/``w_fixed`` are the real and fixed-point weight rows (vector or
    matrix), ``delta_b`` the bias difference, ``s_prev`` the DNN interval of
    the previous layer and ``d_prev`` its difference interval.
    """
    w = np.asarray(w, dtype=float)
    w_fixed = np.asarray(w_fixed, dtype=float)
    if w.shape != w_fixed.shape or w.shape[-1] != len(s_prev) or len(s_prev) != len(d_prev):
        raise ValueError("aff_trs: dimension mismatch")
    dw = w_fixed - w
    a_lo, a_hi = interval_dot(w_fixed, d_prev.lo, d_prev.hi)
    b_lo, b_hi = interval_dot(dw, s_prev.lo, s_prev.hi)
    return a_lo + b_lo + delta_b - xi, a_hi + b_hi + delta_b + xi


def _clamp(x, a, b):
    return min(max(x, a), b)


def act_trs(d_in: tuple, s_dnn: tuple, s_qnn: tuple, t: float) -> tuple:
    """Difference bounds after ReLU (DNN) vs clamp to [0, t] (QNN) of one neuron.

    ``d_in`` is the pre-activation difference interval, ``s_dnn`` the DNN
    pre-activation interval and ``s_qnn`` the aligned QNN pre-activation
    interval.
    """
    lb_d, ub_d = s_dnn
    lb_q, ub_q = s_qnn
    lb_in, ub_in = d_in
    if not t > 0:
        raise ValueError("act_trs: clamp bound must be positive")
    inside = ub_q <= t and lb_q >= 0
    saturated = lb_q >= t or ub_q <= 0

    if ub_d <= 0:
        # DNN neuron always inactive
        lb, ub = _clamp(lb_q, 0, t), _clamp(ub_q, 0, t)
    elif lb_d >= 0:
        # DNN neuron always active
        if inside:
            lb, ub = lb_in, ub_in
        elif saturated:
            lb, ub = _clamp(lb_q, 0, t) - ub_d, _clamp(ub_q, 0, t) - lb_d
        elif ub_q <= t:
            lb, ub = max(-ub_d, lb_in), max(-lb_d, ub_in)
        elif lb_q >= 0:
            lb, ub = min(t - ub_d, lb_in), min(t - lb_d, ub_in)
        else:
            lb = max(-ub_d, min(t - ub_d, lb_in))
            ub = max(-lb_d, min(t - lb_d, ub_in))
    else:
        # DNN neuron unstable
        if inside:
            lb, ub = min(lb_q, lb_in), min(ub_q, ub_in)
        elif saturated:
            lb, ub = _clamp(lb_q, 0, t) - ub_d, _clamp(ub_q, 0, t)
        elif ub_q <= t:
            lb, ub = max(lb_in, -ub_d), min(ub_in, ub_q)
            if ub_in <= 0:
                ub = 0.0
            if lb_in >= 0:
                lb = 0.0
        elif lb_q >= 0:
            lb, ub = min(lb_in, lb_q, t - ub_d), min(ub_in, t)
        else:
            lb = min(t - ub_d, 0.0, max(lb_in, -ub_d))
            ub = _clamp(ub_in, 0, t)

    # intersect with (S(x~) cap [0, t]) - (S(x) cap [0, inf))
    lb = max(lb, _clamp(lb_q, 0, t) - max(ub_d, 0.0))
    ub = min(ub, _clamp(ub_q, 0, t) - max(lb_d, 0.0))
    if lb > ub:
        if lb - ub > _EMPTY_TOL * max(1.0, abs(lb), abs(ub)):
            raise SoundnessError(
                f"empty difference interval [{lb}, {ub}] for d_in={d_in}, S(x)={s_dnn}, S(x~)={s_qnn}, t={t}")
        lb = ub = (lb + ub) / 2.0
    return float(lb), float(ub)


def _act_layer(d_in: Box, s_dnn: Box, s_qnn: Box, t: float) -> Box:
    out = [act_trs(d_in[j], s_dnn[j], s_qnn[j], t) for j in range(len(d_in))]
    return Box(np.array([o[0] for o in out]), np.array([o[1] for o in out]))


# --------------------------------------------------------------------------
# Analyses
# --------------------------------------------------------------------------


def _check(net: Network, qnet: QuantizedNetwork, region: InputRegion) -> None:
    check_pair(net, qnet)
    if qnet.scheme.hidden.signed:
        raise UnsupportedConfiguration("difference analysis requires an unsigned hidden-layer format")
    if region.dim != net.n_inputs:
        raise ValueError(f"region has dimension {region.dim}, network expects {net.n_inputs}")


def input_difference(qnet: QuantizedNetwork, region: InputRegion) -> Box:
    """Exact bounds of 2^-F_in x^ - x^/span over the region."""
    s = qnet.scheme
    return region_box(region).scale(2.0 ** -s.input.frac - 1.0 / s.input_span)


def propagate_interval(net: Network, qnet: QuantizedNetwork, region: InputRegion) -> DraResult:
    _check(net, qnet, region)
    s = qnet.scheme
    h = 2.0 ** -s.hidden.frac
    t = h * s.hidden.ub
    dnn = analyze_dnn(net, dnn_input_box(region)).layers
    qnn = analyze_qnn_concrete(qnet, region)
    delta_in: list = [None]
    delta = [input_difference(qnet, region)]
    last = net.n_affine - 1
    for k in range(net.n_affine):
        xi = 0.0 if k == last else h / 2.0
        db = qnet.fixed_bias(k) - net.biases[k]
        lo, hi = aff_trs(net.weights[k], qnet.fixed_weights(k), db, dnn[k].post, delta[k], xi)
        d_in = Box(lo, hi)
        delta_in.append(d_in)
        if k == last:
            delta.append(d_in)
        else:
            delta.append(_act_layer(d_in, dnn[k + 1].pre, qnn[k + 1].pre.scale(h), t))
    return DraResult("interval", delta_in, delta, dnn, qnn)


def symbolic_diff_bounds(dnn_forms, qnn_forms, span: float, hidden_frac: int, box: Box) -> Box:
    """Difference bounds from input-substituted forms of both networks.

    ``dnn_forms`` range over the real input x, ``qnn_forms`` over the integer
    input x^ = span * x; ``box`` is the real input box.
    """
    h = 2.0 ** -hidden_frac
    # lower: 2^-F_h * (QNN lower form) - (DNN upper form), rewritten over x
    lc = h * span * qnn_forms.lower - dnn_forms.upper
    lk = h * qnn_forms.lower_const - dnn_forms.upper_const
    uc = h * span * qnn_forms.upper - dnn_forms.lower
    uk = h * qnn_forms.upper_const - dnn_forms.lower_const
    lo = np.maximum(lc, 0) @ box.lo + np.minimum(lc, 0) @ box.hi + lk
    hi = np.maximum(uc, 0) @ box.hi + np.minimum(uc, 0) @ box.lo + uk
    return Box(lo, hi)


def propagate_symbolic(net: Network, qnet: QuantizedNetwork, region: InputRegion) -> DraResult:
    _check(net, qnet, region)
    s = qnet.scheme
    h = 2.0 ** -s.hidden.frac
    t = h * s.hidden.ub
    box = dnn_input_box(region)
    dnn = analyze_dnn(net, box)
    qnn = analyze_qnn_symbolic(qnet, region)
    delta_in: list = [None]
    delta = [input_difference(qnet, region)]
    last = net.n_affine - 1
    for k in range(1, net.n_affine + 1):
        d_in = symbolic_diff_bounds(dnn.pre_forms[k], qnn.pre_forms[k], s.input_span, s.hidden.frac, box)
        delta_in.append(d_in)
        if k - 1 == last:
            delta.append(d_in)
        else:
            delta.append(_act_layer(d_in, dnn.layers[k].pre, qnn.layers[k].pre.scale(h), t))
    return DraResult("symbolic", delta_in, delta, dnn.layers, qnn.layers)


def _subtract(q: Box, d: Box) -> Box:
    return Box(q.lo - d.hi, q.hi - d.lo)


def naive_diff(net: Network, qnet: QuantizedNetwork, region: InputRegion) -> DraResult:
    """Independent analyses of both networks followed by interval subtraction."""
    _check(net, qnet, region)
    h = 2.0 ** -qnet.scheme.hidden.frac
    dnn = analyze_dnn(net, dnn_input_box(region)).layers
    qnn = analyze_qnn_concrete(qnet, region)
    delta_in: list = [None]
    delta = [input_difference(qnet, region)]
    for k in range(1, net.n_affine + 1):
        delta_in.append(_subtract(qnn[k].pre.scale(h), dnn[k].pre))
        delta.append(_subtract(qnn[k].post.scale(h), dnn[k].post))
    return DraResult("naive", delta_in, delta, dnn, qnn)


def _meet(a: Box | None, b: Box | None) -> Box | None:
    if a is None or b is None:
        return a if b is None else b
    lo, hi = np.maximum(a.lo, b.lo), np.minimum(a.hi, b.hi)
    if np.any(lo > hi + _EMPTY_TOL):
        raise SoundnessError("sound difference intervals do not intersect")
    return Box(lo, np.maximum(lo, hi))


def combine(a: DraResult, b: DraResult) -> DraResult:
    """Per-neuron intersection of two sound results."""
    return DraResult(
        f"{a.method}+{b.method}",
        [_meet(x, y) for x, y in zip(a.delta_in, b.delta_in)],
        [_meet(x, y) for x, y in zip(a.delta, b.delta)],
        a.dnn,
        a.qnn,
    )


def run(method: str, net: Network, qnet: QuantizedNetwork, region: InputRegion) -> DraResult:
    if method == "interval":
        return propagate_interval(net, qnet, region)
    if method == "symbolic":
        return propagate_symbolic(net, qnet, region)
    if method == "naive":
        return naive_diff(net, qnet, region)
    raise ValueError(f"unknown analysis {method!r}; expected one of {', '.join(METHODS)}")
