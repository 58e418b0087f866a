"""CPLEX LP-format writer and a reader for the subset the writer produces."""

from __future__ import annotations

import math
import re

from .problem import BINARY, CONTINUOUS, INTEGER, MilpProblem

_LINE = 200
_SENSE_OUT = {"<=": "<=", ">=": ">=", "=": "="}


def _num(x: float) -> str:
    # repr is the shortest string that round-trips the double exactly
    return repr(float(x))


def _expr(coeffs) -> list[str]:
    toks = []
    for v, c in coeffs:
        sign = "-" if c < 0 else "+"
        toks.append(f"{sign} {_num(abs(c))} {v}")
    return toks


def _wrap(head: str, toks: list[str], tail: str = "") -> list[str]:
    lines, cur = [], head
    for t in toks + ([tail] if tail else []):
        if len(cur) + len(t) + 1 > _LINE and cur.strip():
            lines.append(cur)
            cur = "   "
        cur = f"{cur} {t}"
    lines.append(cur)
    return lines


def emit_lp(p: MilpProblem) -> str:
    out = []
    if p.objective is None:
        out.append("Minimize")
        out.append(" obj:")
    else:
        sense, coeffs = p.objective
        out.append("Maximize" if sense == "max" else "Minimize")
        out.extend(_wrap(" obj:", _expr(coeffs)))
    if p.constraints:
        out.append("Subject To")
        for c in p.constraints:
            out.extend(_wrap(f" {c.name}:", _expr(c.coeffs), f"{_SENSE_OUT[c.sense]} {_num(c.rhs)}"))
    bounds = []
    for v in p.variables.values():
        if v.kind == BINARY:
            continue
        lo, hi = v.lb, v.ub
        if lo == -math.inf and hi == math.inf:
            bounds.append(f" {v.name} free")
        elif lo == hi:
            bounds.append(f" {v.name} = {_num(lo)}")
        else:
            ls = "-inf" if lo == -math.inf else _num(lo)
            hs = "+inf" if hi == math.inf else _num(hi)
            bounds.append(f" {ls} <= {v.name} <= {hs}")
    if bounds:
        out.append("Bounds")
        out.extend(bounds)
    for title, kind in (("Generals", INTEGER), ("Binaries", BINARY)):
        names = [v.name for v in p.variables.values() if v.kind == kind]
        if names:
            out.append(title)
            out.extend(_wrap("", names))
    out.append("End")
    return "\n".join(out) + "\n"


_SECTIONS = {
    "maximize": "obj", "maximum": "obj", "max": "obj",
    "minimize": "obj", "minimum": "obj", "min": "obj",
    "subject to": "st", "such that": "st", "st": "st", "s.t.": "st",
    "bounds": "bounds", "bound": "bounds",
    "generals": "gen", "general": "gen", "gen": "gen",
    "binaries": "bin", "binary": "bin", "bin": "bin",
    "end": "end",
}


def _tokens_expr(toks: list[str]) -> list:
    terms, sign, coef = [], 1.0, None
    for t in toks:
        if t in ("+", "-"):
            sign = -1.0 if t == "-" else 1.0
            continue
        try:
            coef = float(t)
            continue
        except ValueError:
            pass
        terms.append((t, sign * (1.0 if coef is None else coef)))
        sign, coef = 1.0, None
    return terms


def parse_lp(text: str) -> MilpProblem:
    """Read an LP file in the dialect written by ``emit_lp``."""
    section = None
    obj_sense = None
    obj_toks: list = []
    cons: list = []  # (name, tokens)
    bounds: list = []
    generals: list = []
    binaries: list = []
    pending = None
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        key = line.lower()
        if key in _SECTIONS:
            section = _SECTIONS[key]
            if section == "obj":
                obj_sense = "max" if key.startswith("max") else "min"
            pending = None
            continue
        if section == "obj":
            if ":" in line:
                line = line.split(":", 1)[1]
            obj_toks.extend(line.split())
        elif section == "st":
            if re.match(r"^[A-Za-z_][\w.]*\s*:", line):
                name, line = line.split(":", 1)
                pending = [name.strip(), []]
                cons.append(pending)
            elif pending is None:
                pending = [f"c{len(cons)}", []]
                cons.append(pending)
            pending[1].extend(line.split())
        elif section == "bounds":
            bounds.append(line)
        elif section == "gen":
            generals.extend(line.split())
        elif section == "bin":
            binaries.extend(line.split())
        elif section == "end":
            break

    p = MilpProblem()
    lb: dict = {}
    ub: dict = {}
    order: list = []

    def see(v):
        if v not in lb:
            lb[v], ub[v] = 0.0, math.inf
            order.append(v)

    obj = _tokens_expr(obj_toks)
    parsed = []
    for name, toks in cons:
        idx = next(i for i, t in enumerate(toks) if t in ("<=", ">=", "=", "<", ">", "=<", "=>"))
        sense = {"<": "<=", "=<": "<=", ">": ">=", "=>": ">="}.get(toks[idx], toks[idx])
        terms = _tokens_expr(toks[:idx])
        rhs = float("".join(toks[idx + 1:]))
        parsed.append((name, terms, sense, rhs))
        for v, _ in terms:
            see(v)
    for v, _ in obj:
        see(v)
    for b in bounds:
        t = b.split()
        if len(t) == 2 and t[1].lower() == "free":
            see(t[0])
            lb[t[0]], ub[t[0]] = -math.inf, math.inf
        elif len(t) == 5:
            see(t[2])
            lb[t[2]], ub[t[2]] = float(t[0]), float(t[4])
        elif len(t) == 3 and t[1] == "=":
            see(t[0])
            lb[t[0]] = ub[t[0]] = float(t[2])
        elif len(t) == 3 and t[1] in ("<=", ">="):
            var, val = (t[0], float(t[2])) if not _is_num(t[0]) else (t[2], float(t[0]))
            see(var)
            upper = (t[1] == "<=") == (var == t[0])
            if upper:
                ub[var] = val
            else:
                lb[var] = val
        else:
            raise ValueError(f"cannot parse bound line {b!r}")
    for v in generals + binaries:
        see(v)
    kinds = {v: CONTINUOUS for v in order}
    for v in generals:
        kinds[v] = INTEGER
    for v in binaries:
        kinds[v] = BINARY
        lb[v], ub[v] = max(lb[v], 0.0), min(ub[v], 1.0)
    for v in order:
        p.add_var(v, kinds[v], lb[v], ub[v])
    for name, terms, sense, rhs in parsed:
        p.add(terms, sense, rhs, name)
    if obj:
        p.set_objective(obj_sense or "min", obj)
    return p


def _is_num(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False
