"""Independent exact-arithmetic reference semantics used as a test oracle.

Written directly from the definitions with ``fractions.Fraction`` and plain
loops; shares no code with the package beyond reading network parameters.
"""

from fractions import Fraction
from itertools import product
import math


def rnd(x: Fraction) -> int:
    """Round to nearest, ties away from zero."""
    a = abs(x)
    q = math.floor(a + Fraction(1, 2))
    return q if x >= 0 else -q


def clip(x, a, b):
    return a if x < a else b if x > b else x


def dnn(weights, biases, x):
    """Real network in exact rationals; returns (pre, post) per layer."""
    x = [Fraction(v) for v in x]
    pres, posts = [x], [x]
    for k, (w, b) in enumerate(zip(weights, biases)):
        pre = [sum((Fraction(float(w[j][i])) * x[i] for i in range(len(x))), Fraction(0)) + Fraction(float(b[j]))
               for j in range(len(b))]
        x = pre if k == len(weights) - 1 else [max(v, Fraction(0)) for v in pre]
        pres.append(pre)
        posts.append(x)
    return pres, posts


def qnn(weights, biases, f_w, f_b, f_in, f_h, h_ub, x):
    """Quantized network; hidden pre values are after rounding, before clamping."""
    x = [int(v) for v in x]
    pres, posts = [x], [x]
    last = len(weights) - 1
    for k, (w, b) in enumerate(zip(weights, biases)):
        e = f_h - f_w - f_in if k == 0 else -f_w
        z = [Fraction(2) ** e * sum(int(w[j][i]) * x[i] for i in range(len(x))) + Fraction(2) ** (f_h - f_b) * int(b[j])
             for j in range(len(b))]
        if k == last:
            pres.append(z)
            posts.append(z)
            break
        pre = [rnd(v) for v in z]
        x = [clip(v, 0, h_ub) for v in pre]
        pres.append(pre)
        posts.append(x)
    return pres, posts


def errors(net, qnet, lo, hi, g):
    """Exact signed errors over the integer box [lo, hi], in lexicographic order."""
    s = qnet.scheme
    span = s.input.ub - s.input.lb
    out = []
    for pt in product(*(range(a, b + 1) for a, b in zip(lo, hi))):
        _, qp = qnn([w.tolist() for w in qnet.weights], [b.tolist() for b in qnet.biases], s.weights.frac,
                    s.bias.frac, s.input.frac, s.hidden.frac, s.hidden.ub, pt)
        _, dp = dnn(net.weights, net.biases, [Fraction(v, span) for v in pt])
        out.append((pt, Fraction(2) ** -s.hidden.frac * qp[-1][g] - dp[-1][g]))
    return out
