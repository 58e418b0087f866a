"""MILP encoding of the error-bound property.

Variable names (k is the layer index, 1-based for affine layers; j the neuron):

* ``qin_j`` integer QNN input, ``din_j`` DNN input ``qin_j / span``;
* ``d_k_j`` DNN neuron after ReLU (output layer: affine value), ``a_k_j`` its
  phase binary;
* ``q_k_j`` QNN neuron after rounding and clamping (output layer: affine
  value in QNN units), ``qr_k_j`` the rounded integer, ``qm_k_j`` the
  intermediate max(qr, 0), ``bl_k_j`` / ``bu_k_j`` the lower / upper clamp
  binaries;
* ``eta``, ``v`` the absolute-value gadget on the target output difference.

Pre-activation expressions are inlined into the constraints rather than
given their own variables.  Big-M constants come from per-node bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..abstract import analyze_dnn, analyze_qnn_concrete, dnn_input_box
from ..model import (
    InputRegion,
    Network,
    QuantizedNetwork,
    QuantScheme,
    check_pair,
    dnn_trace,
)
from .problem import BINARY, CONTINUOUS, INTEGER, MilpProblem


def _affine(names, row, const, scale: float = 1.0) -> tuple[list, float]:
    return [(n, scale * float(c)) for n, c in zip(names, row) if c != 0], float(const)


def rounding_grid(exponent: int, bias_shift: int) -> float:
    """Smallest positive gap between z - 0.5 and an integer for z = 2^e * int + 2^s * int."""
    return 2.0 ** min(exponent, bias_shift, -1)


def encode_region(p: MilpProblem, region: InputRegion, scheme: QuantScheme) -> tuple[list, list]:
    lo, hi = region.lower, region.upper
    if np.any(lo > hi):
        raise ValueError("empty input region")
    qn, dn = [], []
    span = scheme.input_span
    for j in range(region.dim):
        q = p.add_var(f"qin_{j}", INTEGER, lo[j], hi[j], meta=f"qnn input {j}")
        d = p.add_var(f"din_{j}", CONTINUOUS, lo[j] / span, hi[j] / span, meta=f"dnn input {j}")
        p.add({d: 1.0, q: -1.0 / span}, "=", 0.0, f"input_{j}")
        qn.append(q)
        dn.append(d)
    return qn, dn


def encode_dnn(p: MilpProblem, net: Network, layers: list, inputs: list, simplify: bool = True) -> tuple:
    """DNN constraints; ``layers`` are per-layer intervals (``layers[k].pre`` used for k >= 1)."""
    if len(layers) != net.n_affine + 1:
        raise ValueError("encode_dnn needs intervals for every layer")
    names = [list(inputs)]
    gadgets: dict = {}
    last = net.n_affine - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        lay = k + 1
        lo, hi = layers[lay].pre.lo, layers[lay].pre.hi
        cur = []
        for j in range(w.shape[0]):
            terms, c = _affine(names[k], w[j], b[j])
            neg = [(n, -v) for n, v in terms]
            l, u = float(lo[j]), float(hi[j])
            if not (math.isfinite(l) and math.isfinite(u)):
                raise ValueError(f"missing bounds for dnn neuron {lay},{j}")
            x = f"d_{lay}_{j}"
            if k == last:
                p.add_var(x, CONTINUOUS, l, u, meta=f"dnn output {j}")
                p.add([(x, 1.0)] + neg, "=", c, f"dnn_{lay}_{j}")
                gadgets[lay, j] = "affine"
            elif simplify and u <= 0:
                p.add_var(x, CONTINUOUS, 0.0, 0.0, meta=f"dnn layer {lay} neuron {j}")
                p.add({x: 1.0}, "=", 0.0, f"dnn_{lay}_{j}_off")
                gadgets[lay, j] = "zero"
            elif simplify and l >= 0:
                p.add_var(x, CONTINUOUS, l, u, meta=f"dnn layer {lay} neuron {j}")
                p.add([(x, 1.0)] + neg, "=", c, f"dnn_{lay}_{j}_on")
                gadgets[lay, j] = "identity"
            else:
                p.add_var(x, CONTINUOUS, 0.0, max(u, 0.0), meta=f"dnn layer {lay} neuron {j}")
                a = p.add_var(f"a_{lay}_{j}", BINARY, meta=f"dnn layer {lay} neuron {j} phase")
                p.add([(x, 1.0)] + neg, ">=", c, f"dnn_{lay}_{j}_ge_pre")
                p.add({x: 1.0}, ">=", 0.0, f"dnn_{lay}_{j}_ge_0")
                p.add([(x, 1.0), (a, -l)] + neg, "<=", c - l, f"dnn_{lay}_{j}_le_pre")
                p.add({x: 1.0, a: -u}, "<=", 0.0, f"dnn_{lay}_{j}_le_u")
                gadgets[lay, j] = "relu"
            cur.append(x)
        names.append(cur)
    return names, gadgets


def _max0(p, x, r, a, lo, hi, tag):
    """x = max(r, 0) for r in [lo, hi]."""
    p.add({x: 1.0, r: -1.0}, ">=", 0.0, f"{tag}_ge_r")
    p.add({x: 1.0}, ">=", 0.0, f"{tag}_ge_0")
    p.add({x: 1.0, r: -1.0, a: -lo}, "<=", -lo, f"{tag}_le_r")
    p.add({x: 1.0, a: -hi}, "<=", 0.0, f"{tag}_le_hi")


def _minc(p, x, r, b, lo, hi, cap, tag):
    """x = min(r, cap) for r in [lo, hi]."""
    p.add({x: 1.0, r: -1.0}, "<=", 0.0, f"{tag}_le_r")
    p.add({x: 1.0}, "<=", cap, f"{tag}_le_c")
    p.add({x: 1.0, r: -1.0, b: cap - hi}, ">=", cap - hi, f"{tag}_ge_r")
    p.add({x: 1.0, b: cap - lo}, ">=", cap, f"{tag}_ge_c")


def encode_qnn(p: MilpProblem, qnet: QuantizedNetwork, layers: list, inputs: list,
               simplify: bool = True) -> tuple:
    """QNN constraints; ``layers`` are the integer intervals of the concrete analysis.

    Rounding to nearest is encoded exactly as q = floor(z + 1/2); this agrees
    with ties-away-from-zero everywhere except at negative ties, which the
    clamp at 0 maps to the same value.
    """
    if len(layers) != qnet.n_affine + 1:
        raise ValueError("encode_qnn needs intervals for every layer")
    s = qnet.scheme
    cap = float(s.hidden.ub)
    shift = s.hidden.frac - s.bias.frac
    names = [list(inputs)]
    gadgets: dict = {}
    last = qnet.n_affine - 1
    for k, (w, b) in enumerate(zip(qnet.weights, qnet.biases)):
        lay = k + 1
        e = qnet.exponent(k)
        gap = rounding_grid(e, shift)
        lo, hi = layers[lay].pre.lo, layers[lay].pre.hi
        cur = []
        for j in range(w.shape[0]):
            terms, c = _affine(names[k], w[j], b[j] * qnet.bias_scale, 2.0**e)
            neg = [(n, -v) for n, v in terms]
            x = f"q_{lay}_{j}"
            tag = f"qnn_{lay}_{j}"
            if k == last:
                p.add_var(x, CONTINUOUS, float(lo[j]), float(hi[j]), meta=f"qnn output {j}")
                p.add([(x, 1.0)] + neg, "=", c, tag)
                gadgets[lay, j] = "affine"
                cur.append(x)
                continue
            ql, qu = float(lo[j]), float(hi[j])
            # floor(z + 1/2) exceeds the ties-away value by one at a negative tie
            if qu < 0:
                qu += 1.0
            meta = f"qnn layer {lay} neuron {j}"
            if simplify and qu <= 0:
                p.add_var(x, CONTINUOUS, 0.0, 0.0, meta=meta)
                p.add({x: 1.0}, "=", 0.0, f"{tag}_off")
                gadgets[lay, j] = "zero"
            elif simplify and ql >= cap:
                p.add_var(x, CONTINUOUS, cap, cap, meta=meta)
                p.add({x: 1.0}, "=", cap, f"{tag}_sat")
                gadgets[lay, j] = "cap"
            else:
                inside = simplify and ql >= 0 and qu <= cap
                r = x if inside else f"qr_{lay}_{j}"
                p.add_var(r, INTEGER, ql, qu, meta=meta if inside else f"{meta} rounded")
                p.add([(r, 1.0)] + neg, "<=", c + 0.5, f"{tag}_round_le")
                p.add([(r, 1.0)] + neg, ">=", c - 0.5 + gap, f"{tag}_round_ge")
                if inside:
                    gadgets[lay, j] = "round"
                elif simplify and qu <= cap:
                    p.add_var(x, CONTINUOUS, 0.0, qu, meta=meta)
                    bl = p.add_var(f"bl_{lay}_{j}", BINARY, meta=f"{meta} lower clamp")
                    _max0(p, x, r, bl, ql, qu, f"{tag}_max")
                    gadgets[lay, j] = "max"
                elif simplify and ql >= 0:
                    p.add_var(x, CONTINUOUS, ql, cap, meta=meta)
                    bu = p.add_var(f"bu_{lay}_{j}", BINARY, meta=f"{meta} upper clamp")
                    _minc(p, x, r, bu, ql, qu, cap, f"{tag}_min")
                    gadgets[lay, j] = "min"
                else:
                    top = max(qu, 0.0)
                    m = p.add_var(f"qm_{lay}_{j}", CONTINUOUS, 0.0, top, meta=f"{meta} max with 0")
                    p.add_var(x, CONTINUOUS, 0.0, min(top, cap), meta=meta)
                    bl = p.add_var(f"bl_{lay}_{j}", BINARY, meta=f"{meta} lower clamp")
                    bu = p.add_var(f"bu_{lay}_{j}", BINARY, meta=f"{meta} upper clamp")
                    _max0(p, m, r, bl, ql, qu, f"{tag}_max")
                    _minc(p, x, m, bu, 0.0, top, cap, f"{tag}_min")
                    gadgets[lay, j] = "clamp"
            cur.append(x)
        names.append(cur)
    return names, gadgets


def encode_error_objective(p: MilpProblem, q_out: str, d_out: str, epsilon: float | None, hidden_frac: int,
                           bounds: tuple) -> tuple[str, str]:
    """eta = max(d, 0) with d = 2^-F_h q_out - d_out, and 2 eta - d >= epsilon (i.e. |d| >= epsilon).

    ``bounds`` is a sound enclosure of d used to size the big-M constant.
    With ``epsilon`` None only the max gadget is emitted.
    """
    if epsilon is not None and not epsilon > 0:
        raise ValueError("epsilon must be positive")
    h = 2.0**-hidden_frac
    big_m = max(abs(bounds[0]), abs(bounds[1])) + 1.0
    eta = p.add_var("eta", CONTINUOUS, 0.0, big_m, meta="max(error, 0)")
    v = p.add_var("v", BINARY, meta="error sign")
    nd = [(q_out, -h), (d_out, 1.0)]
    p.add({eta: 1.0}, ">=", 0.0, "eta_ge_0")
    p.add([(eta, 1.0)] + nd, ">=", 0.0, "eta_ge_d")
    p.add({eta: 1.0, v: -big_m}, "<=", 0.0, "eta_le_mv")
    p.add([(eta, 1.0), (v, big_m)] + nd, "<=", big_m, "eta_le_d")
    if epsilon is not None:
        p.add([(eta, 2.0)] + nd, ">=", epsilon, "abs_error_ge_eps")
    return eta, v


def encode_diff_hints(p: MilpProblem, dra, hidden_frac: int, dnn_names: list, qnn_names: list) -> int:
    """LB(delta) <= 2^-F_h q - d <= UB(delta) for every hidden neuron; returns the number added."""
    h = 2.0**-hidden_frac
    added = 0
    for k in range(1, len(dnn_names) - 1):
        box = dra.delta[k]
        for j, (dn, qn) in enumerate(zip(dnn_names[k], qnn_names[k])):
            lo, hi = float(box.lo[j]), float(box.hi[j])
            if not (math.isfinite(lo) and math.isfinite(hi)):
                continue
            p.add({qn: h, dn: -1.0}, ">=", lo, f"hint_{k}_{j}_lo")
            p.add({qn: h, dn: -1.0}, "<=", hi, f"hint_{k}_{j}_hi")
            added += 2
    return added


@dataclass
class Encoding:
    """A built problem plus what is needed to map region points to full assignments."""

    problem: MilpProblem
    net: Network
    qnet: QuantizedNetwork
    region: InputRegion
    target: int
    epsilon: float
    dnn_names: list
    qnn_names: list
    dnn_gadgets: dict
    qnn_gadgets: dict
    diff_bounds: tuple
    hints: int = 0
    simplify: bool = True
    extra: dict = field(default_factory=dict)

    def decode(self, witness: dict) -> tuple:
        """Integer input encoded by a solver assignment."""
        return tuple(int(round(witness[n])) for n in self.qnn_names[0])

    def assignment(self, x_hat) -> dict:
        """Full variable assignment induced by executing both networks on ``x_hat``."""
        net, qnet = self.net, self.qnet
        s = qnet.scheme
        x_hat = np.asarray(x_hat, dtype=np.int64)
        out: dict = {}
        span = s.input_span
        for j, v in enumerate(x_hat):
            out[f"qin_{j}"] = float(v)
            out[f"din_{j}"] = v / span
        dt = dnn_trace(net, x_hat / span)
        last = net.n_affine
        for k in range(1, last + 1):
            for j in range(len(dt.pre[k][0])):
                pre = float(dt.pre[k][0, j])
                out[f"d_{k}_{j}"] = float(dt.post[k][0, j])
                if self.dnn_gadgets[k, j] == "relu":
                    out[f"a_{k}_{j}"] = 1.0 if pre > 0 else 0.0
        cap = s.hidden.ub
        prev = x_hat
        for k in range(1, last + 1):
            w, b = qnet.weights[k - 1], qnet.biases[k - 1]
            z = (w @ prev) * 2.0 ** qnet.exponent(k - 1) + qnet.bias_scale * b
            if k == last:
                for j, zj in enumerate(z):
                    out[f"q_{k}_{j}"] = float(zj)
                break
            qr = np.floor(z + 0.5).astype(np.int64)
            qm = np.maximum(qr, 0)
            post = np.minimum(qm, cap)
            for j in range(len(z)):
                g = self.qnn_gadgets[k, j]
                out[f"q_{k}_{j}"] = float(post[j])
                if g in ("max", "min", "clamp"):
                    out[f"qr_{k}_{j}"] = float(qr[j])
                if g in ("max", "clamp"):
                    out[f"bl_{k}_{j}"] = 1.0 if qr[j] > 0 else 0.0
                if g in ("min", "clamp"):
                    out[f"bu_{k}_{j}"] = 1.0 if qm[j] <= cap else 0.0
                if g == "clamp":
                    out[f"qm_{k}_{j}"] = float(qm[j])
            prev = post
        g = self.target
        d = 2.0**-s.hidden.frac * out[f"q_{last}_{g}"] - out[f"d_{last}_{g}"]
        out["eta"] = max(d, 0.0)
        out["v"] = 1.0 if d > 0 else 0.0
        return out


def build_problem(net: Network, qnet: QuantizedNetwork, region: InputRegion, target: int, epsilon: float,
                  dra=None, hints: bool = False, simplify: bool = True) -> Encoding:
    """Full encoding: region, both networks, the |error| >= epsilon gadget and optional hints.

    The problem is feasible iff some region input has |error| >= epsilon.
    ``dra`` supplies the hint intervals and is required when ``hints`` is set.
    """
    check_pair(net, qnet)
    if not 0 <= target < net.n_outputs:
        raise ValueError(f"class {target} out of range")
    if hints and dra is None:
        raise ValueError("difference hints need an analysis result")
    s = qnet.scheme
    dnn_layers = analyze_dnn(net, dnn_input_box(region)).layers
    qnn_layers = analyze_qnn_concrete(qnet, region)
    p = MilpProblem()
    qin, din = encode_region(p, region, s)
    dn, dg = encode_dnn(p, net, dnn_layers, din, simplify)
    qn, qg = encode_qnn(p, qnet, qnn_layers, qin, simplify)
    h = 2.0**-s.hidden.frac
    lo = h * float(qnn_layers[-1].pre.lo[target]) - float(dnn_layers[-1].pre.hi[target])
    hi = h * float(qnn_layers[-1].pre.hi[target]) - float(dnn_layers[-1].pre.lo[target])
    if dra is not None:
        lo = max(lo, float(dra.output.lo[target]))
        hi = min(hi, float(dra.output.hi[target]))
        hi = max(lo, hi)
    encode_error_objective(p, qn[-1][target], dn[-1][target], epsilon, s.hidden.frac, (lo, hi))
    n_hints = encode_diff_hints(p, dra, s.hidden.frac, dn, qn) if hints else 0
    return Encoding(p, net, qnet, region, target, epsilon, dn, qn, dg, qg, (lo, hi), n_hints, simplify)
