"""Polyhedral abstract domains for the DNN and the QNN, plus concrete QNN intervals.

Every node carries a lower and an upper affine form over the nodes of the
preceding abstract layer together with concrete bounds.  Concrete bounds are
obtained by back-substituting the forms all the way down to the input layer
and evaluating them over the input box.

The DNN is split into affine and ReLU layers.  The QNN is split into affine
(with a +-0.5 rounding slack), ReLU and min(., C_h.ub) layers; the ReLU
relaxation is shared between both networks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import InputRegion, Network, QuantizedNetwork, round_nearest_array


@dataclass(frozen=True)
class Box:
    """A vector of closed intervals."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", np.atleast_1d(np.asarray(self.lo)))
        object.__setattr__(self, "hi", np.atleast_1d(np.asarray(self.hi)))
        if self.lo.shape != self.hi.shape:
            raise ValueError("Box bounds must have the same shape")

    def __len__(self) -> int:
        return len(self.lo)

    def __getitem__(self, j) -> tuple:
        return (self.lo[j], self.hi[j])

    def scale(self, c: float) -> "Box":
        a, b = self.lo * c, self.hi * c
        return Box(np.minimum(a, b), np.maximum(a, b))

    def contains(self, values: np.ndarray, tol: float = 0.0) -> np.ndarray:
        v = np.asarray(values)
        return (v >= self.lo - tol) & (v <= self.hi + tol)

    def width(self) -> np.ndarray:
        return self.hi - self.lo


@dataclass(frozen=True)
class LayerAnalysis:
    """Per-neuron intervals of one layer before (``pre``) and after (``post``) the activation."""

    pre: Box
    post: Box


def _pos(a):
    return np.maximum(a, 0.0)


def _neg(a):
    return np.minimum(a, 0.0)


def interval_dot(w: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> tuple:
    """Bounds of w . x for x in [lo, hi] by sign-directed endpoint selection.

    ``w`` may be a vector or a matrix (one row per output).
    """
    return _pos(w) @ lo + _neg(w) @ hi, _pos(w) @ hi + _neg(w) @ lo


# --------------------------------------------------------------------------
# Abstract elements and layers
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AbstractElement:
    """<lower form, upper form, l, u> of one node; forms are coefficient vector + constant."""

    lower: np.ndarray
    lower_const: float
    upper: np.ndarray
    upper_const: float
    l: float = np.nan
    u: float = np.nan

    def with_bounds(self, l: float, u: float) -> "AbstractElement":
        return AbstractElement(self.lower, self.lower_const, self.upper, self.upper_const, l, u)

    def evaluate(self, x: np.ndarray) -> tuple:
        """Value of the (lower, upper) forms at predecessor values ``x``."""
        return self.lower @ x + self.lower_const, self.upper @ x + self.upper_const


@dataclass(frozen=True)
class AbstractLayer:
    """Stacked abstract elements sharing one predecessor layer."""

    lower: np.ndarray  # (m, n)
    lower_const: np.ndarray  # (m,)
    upper: np.ndarray
    upper_const: np.ndarray
    l: np.ndarray
    u: np.ndarray

    def __len__(self) -> int:
        return len(self.lower_const)

    def element(self, j: int) -> AbstractElement:
        return AbstractElement(self.lower[j], float(self.lower_const[j]), self.upper[j],
                               float(self.upper_const[j]), float(self.l[j]), float(self.u[j]))

    def elements(self) -> list[AbstractElement]:
        return [self.element(j) for j in range(len(self))]

    @classmethod
    def from_elements(cls, elems: list[AbstractElement]) -> "AbstractLayer":
        return cls(np.array([e.lower for e in elems], dtype=float),
                   np.array([e.lower_const for e in elems], dtype=float),
                   np.array([e.upper for e in elems], dtype=float),
                   np.array([e.upper_const for e in elems], dtype=float),
                   np.array([e.l for e in elems], dtype=float),
                   np.array([e.u for e in elems], dtype=float))

    @property
    def bounds(self) -> Box:
        return Box(self.l.copy(), self.u.copy())


def _substitute(lc, lk, uc, uk, chain):
    """Push lower/upper forms (rows of lc/uc) through ``chain`` (innermost last) down to the input."""
    lc, uc = np.atleast_2d(lc), np.atleast_2d(uc)
    lk, uk = np.atleast_1d(np.asarray(lk, dtype=float)), np.atleast_1d(np.asarray(uk, dtype=float))
    for layer in reversed(chain):
        lp, ln = _pos(lc), _neg(lc)
        up, un = _pos(uc), _neg(uc)
        lk = lk + lp @ layer.lower_const + ln @ layer.upper_const
        uk = uk + up @ layer.upper_const + un @ layer.lower_const
        lc = lp @ layer.lower + ln @ layer.upper
        uc = up @ layer.upper + un @ layer.lower
    return lc, lk, uc, uk


def _concretize(lc, lk, uc, uk, box: Box):
    lo = _pos(lc) @ box.lo + _neg(lc) @ box.hi + lk
    hi = _pos(uc) @ box.hi + _neg(uc) @ box.lo + uk
    return lo, hi


def substitute_to_input(e: AbstractElement, chain: list, box: Box) -> AbstractElement:
    """Rewrite ``e`` over the input variables; bounds are those of the substituted forms."""
    lc, lk, uc, uk = _substitute(e.lower, e.lower_const, e.upper, e.upper_const, chain)
    lo, hi = _concretize(lc, lk, uc, uk, box)
    return AbstractElement(lc[0], float(lk[0]), uc[0], float(uk[0]), float(lo[0]), float(hi[0]))


def back_substitute(e: AbstractElement, chain: list, box: Box) -> tuple:
    """Sound (l, u) of node ``e`` whose forms range over the last layer of ``chain``.

    ``chain`` lists the abstract layers from the first one after the input to
    the direct predecessor of ``e``; an empty chain means ``e`` is over the input.
    """
    s = substitute_to_input(e, chain, box)
    return s.l, s.u


def _substitute_layer(layer: AbstractLayer, chain: list, box: Box) -> AbstractLayer:
    lc, lk, uc, uk = _substitute(layer.lower, layer.lower_const, layer.upper, layer.upper_const, chain)
    lo, hi = _concretize(lc, lk, uc, uk, box)
    return AbstractLayer(lc, lk, uc, uk, lo, hi)


# --------------------------------------------------------------------------
# Transformers
# --------------------------------------------------------------------------


def dnn_affine_abs(w_row, b: float, chain: list, box: Box) -> AbstractElement:
    w_row = np.asarray(w_row, dtype=float)
    expected = len(chain[-1]) if chain else len(box)
    if w_row.shape != (expected,):
        raise ValueError(f"affine row has {w_row.shape[0]} coefficients, predecessor has {expected}")
    e = AbstractElement(w_row, float(b), w_row, float(b))
    return e.with_bounds(*back_substitute(e, chain, box))


def qnn_affine_abs(w_row, b_hat: int, exponent: int, hidden_frac: int, bias_frac: int,
                   chain: list, box: Box, slack: float = 0.5) -> AbstractElement:
    """Affine node of the QNN, 2^exponent * W_hat.x + 2^(F_h - F_b) * b_hat, widened by the rounding slack."""
    coef = np.asarray(w_row, dtype=float) * 2.0**exponent
    expected = len(chain[-1]) if chain else len(box)
    if coef.shape != (expected,):
        raise ValueError(f"affine row has {coef.shape[0]} coefficients, predecessor has {expected}")
    c = 2.0 ** (hidden_frac - bias_frac) * b_hat
    e = AbstractElement(coef, c - slack, coef, c + slack)
    return e.with_bounds(*back_substitute(e, chain, box))


def _unit(j: int, n: int, scale: float = 1.0) -> np.ndarray:
    v = np.zeros(n)
    v[j] = scale
    return v


def dnn_relu_abs(e: AbstractElement, j: int, n: int) -> AbstractElement:
    """ReLU of node ``j`` (of ``n``) whose abstract element is ``e``."""
    l, u = e.l, e.u
    zero = np.zeros(n)
    if u <= 0:
        return AbstractElement(zero, 0.0, zero, 0.0, 0.0, 0.0)
    if l >= 0:
        ident = _unit(j, n)
        return AbstractElement(ident, 0.0, ident, 0.0, l, u)
    slope = u / (u - l)
    lam = 1.0 if u >= -l else 0.0
    return AbstractElement(_unit(j, n, lam), 0.0, _unit(j, n, slope), -slope * l, lam * l, u)


def qnn_min_abs(e: AbstractElement, j: int, n: int, t: float) -> AbstractElement:
    """min(x, t) of node ``j`` (of ``n``) whose abstract element is ``e``."""
    l, u = e.l, e.u
    zero = np.zeros(n)
    if l >= t:
        return AbstractElement(zero, float(t), zero, float(t), float(t), float(t))
    if u <= t:
        ident = _unit(j, n)
        return AbstractElement(ident, 0.0, ident, 0.0, l, u)
    alpha = (t - l) / (u - l)
    beta = (u - t) / (u - l)
    # the upper line x is tighter than the constant t iff the mean of [l, u] is at most t
    if (l + u) / 2.0 <= t:
        upper, upper_const, u_new = _unit(j, n), 0.0, u
    else:
        upper, upper_const, u_new = zero, float(t), float(t)
    return AbstractElement(_unit(j, n, alpha), beta * l, upper, upper_const, l, u_new)


# --------------------------------------------------------------------------
# Whole-network analyses
# --------------------------------------------------------------------------


def _relu_layer(aff: AbstractLayer) -> AbstractLayer:
    n = len(aff)
    return AbstractLayer.from_elements([dnn_relu_abs(aff.element(j), j, n) for j in range(n)])


def _min_layer(prev: AbstractLayer, t: float) -> AbstractLayer:
    n = len(prev)
    return AbstractLayer.from_elements([qnn_min_abs(prev.element(j), j, n, t) for j in range(n)])


@dataclass
class SymbolicAnalysis:
    """Result of a DeepPoly-style pass.

    ``layers[k]`` are the per-layer intervals (k = 0 is the input).
    ``pre_forms[k]`` / ``post_forms[k]`` hold, for affine layer ``k`` (1-based,
    ``pre_forms[0]`` is None), the affine-node resp. activation-output-node
    forms rewritten over the input variables.  ``chain`` is the raw sequence
    of abstract layers.
    """

    layers: list
    pre_forms: list
    post_forms: list
    chain: list
    box: Box


def region_box(region: InputRegion) -> Box:
    return Box(region.lower.astype(float), region.upper.astype(float))


def dnn_input_box(region: InputRegion) -> Box:
    span = region.config.ub - region.config.lb
    return Box(region.lower / span, region.upper / span)


def analyze_dnn(net: Network, box: Box) -> SymbolicAnalysis:
    chain: list = []
    layers = [LayerAnalysis(box, box)]
    pre_forms: list = [None]
    post_forms: list = [None]
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        aff = _substitute_layer(AbstractLayer(w, b, w, b, np.zeros(len(b)), np.zeros(len(b))), chain, box)
        # bounds come from the substituted forms; keep the original forms in the chain
        aff = AbstractLayer(w.astype(float), b.astype(float), w.astype(float), b.astype(float), aff.l, aff.u)
        chain.append(aff)
        pre_forms.append(_substitute_layer(aff, chain[:-1], box))
        if k == net.n_affine - 1:
            post_forms.append(pre_forms[-1])
            layers.append(LayerAnalysis(aff.bounds, aff.bounds))
            break
        act = _relu_layer(aff)
        chain.append(act)
        post_forms.append(_substitute_layer(act, chain[:-1], box))
        post = Box(np.maximum(act.l, 0.0) + 0.0, np.maximum(act.u, 0.0) + 0.0)
        layers.append(LayerAnalysis(aff.bounds, post))
    return SymbolicAnalysis(layers, pre_forms, post_forms, chain, box)


def analyze_qnn_symbolic(qnet: QuantizedNetwork, region: InputRegion) -> SymbolicAnalysis:
    """Symbolic analysis of the QNN over the integer input box; values are in QNN integer units."""
    box = region_box(region)
    s = qnet.scheme
    t = float(s.hidden.ub)
    chain: list = []
    layers = [LayerAnalysis(box, box)]
    pre_forms: list = [None]
    post_forms: list = [None]
    last = qnet.n_affine - 1
    for k, (w, b) in enumerate(zip(qnet.weights, qnet.biases)):
        coef = w * 2.0 ** qnet.exponent(k)
        const = qnet.bias_scale * b.astype(float)
        slack = 0.0 if k == last else 0.5
        raw = AbstractLayer(coef, const - slack, coef, const + slack, np.zeros(len(b)), np.zeros(len(b)))
        sub = _substitute_layer(raw, chain, box)
        aff = AbstractLayer(raw.lower, raw.lower_const, raw.upper, raw.upper_const, sub.l, sub.u)
        chain.append(aff)
        pre_forms.append(sub)
        if k == last:
            post_forms.append(sub)
            layers.append(LayerAnalysis(aff.bounds, aff.bounds))
            break
        relu = _relu_layer(aff)
        chain.append(relu)
        mn = _min_layer(relu, t)
        chain.append(mn)
        post_forms.append(_substitute_layer(mn, chain[:-1], box))
        post = Box(np.clip(mn.l, 0.0, t) + 0.0, np.clip(mn.u, 0.0, t) + 0.0)
        layers.append(LayerAnalysis(aff.bounds, post))
    return SymbolicAnalysis(layers, pre_forms, post_forms, chain, box)


def analyze_qnn_concrete(qnet: QuantizedNetwork, region: InputRegion) -> list:
    """Interval analysis of the QNN with exact integer endpoints on hidden layers.

    Hidden ``pre`` intervals are after rounding and before clamping; the
    output layer is real-valued (2^-F_h units).
    """
    lo, hi = region.lower.astype(np.int64), region.upper.astype(np.int64)
    layers = [LayerAnalysis(Box(lo, hi), Box(lo, hi))]
    cub = qnet.scheme.hidden.ub
    last = qnet.n_affine - 1
    for k, (w, b) in enumerate(zip(qnet.weights, qnet.biases)):
        wp, wn = np.maximum(w, 0), np.minimum(w, 0)
        dot_lo = wp @ lo + wn @ hi
        dot_hi = wp @ hi + wn @ lo
        scale = 2.0 ** qnet.exponent(k)
        z_lo = dot_lo * scale + qnet.bias_scale * b
        z_hi = dot_hi * scale + qnet.bias_scale * b
        if k == last:
            layers.append(LayerAnalysis(Box(z_lo, z_hi), Box(z_lo, z_hi)))
            break
        pre_lo, pre_hi = round_nearest_array(z_lo), round_nearest_array(z_hi)
        lo, hi = np.clip(pre_lo, 0, cub), np.clip(pre_hi, 0, cub)
        layers.append(LayerAnalysis(Box(pre_lo, pre_hi), Box(lo, hi)))
    return layers
