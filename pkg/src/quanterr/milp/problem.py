"""Solver-independent representation of a mixed-integer linear program."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

CONTINUOUS = "continuous"
INTEGER = "integer"
BINARY = "binary"
KINDS = (CONTINUOUS, INTEGER, BINARY)
SENSES = ("<=", "=", ">=")

FEASIBLE = "Feasible"
INFEASIBLE = "Infeasible"
TIMEOUT = "Timeout"
BACKEND_ERROR = "BackendError"


@dataclass(frozen=True)
class MilpVar:
    name: str
    kind: str = CONTINUOUS
    lb: float = -math.inf
    ub: float = math.inf

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown variable kind {self.kind!r}")
        if self.kind == BINARY:
            object.__setattr__(self, "lb", max(0.0, self.lb))
            object.__setattr__(self, "ub", min(1.0, self.ub))
        if self.lb > self.ub:
            raise ValueError(f"variable {self.name}: bounds [{self.lb}, {self.ub}] are empty")


@dataclass(frozen=True)
class LinConstraint:
    coeffs: tuple  # ((name, coefficient), ...)
    sense: str
    rhs: float
    name: str = ""

    def __post_init__(self):
        if self.sense not in SENSES:
            raise ValueError(f"unknown comparator {self.sense!r}")
        if not any(c != 0 for _, c in self.coeffs):
            raise ValueError(f"constraint {self.name!r} has no nonzero coefficient")

    def lhs(self, assignment: dict) -> float:
        return math.fsum(c * assignment[v] for v, c in self.coeffs)

    def violation(self, assignment: dict) -> float:
        """Amount by which ``assignment`` violates the constraint (0 when satisfied)."""
        d = self.lhs(assignment) - self.rhs
        if self.sense == "<=":
            return max(d, 0.0)
        if self.sense == ">=":
            return max(-d, 0.0)
        return abs(d)

    def scale(self, assignment: dict) -> float:
        return max(1.0, abs(self.rhs), *(abs(c * assignment[v]) for v, c in self.coeffs))


@dataclass
class MilpProblem:
    """Variables, constraints, an optional objective and node metadata.

    ``objective`` is None for a pure feasibility problem, otherwise a pair
    (``"max"`` or ``"min"``, ((name, coefficient), ...)).  ``meta`` maps a
    variable name to a short description of the network node it encodes.
    """

    variables: dict = field(default_factory=dict)
    constraints: list = field(default_factory=list)
    objective: tuple | None = None
    meta: dict = field(default_factory=dict)

    def add_var(self, name: str, kind: str = CONTINUOUS, lb: float = -math.inf, ub: float = math.inf,
                meta: str | None = None) -> str:
        if name in self.variables:
            raise ValueError(f"duplicate variable {name!r}")
        self.variables[name] = MilpVar(name, kind, float(lb), float(ub))
        if meta:
            self.meta[name] = meta
        return name

    def add(self, coeffs, sense: str, rhs: float, name: str = "") -> LinConstraint:
        """Add sum(coeffs) <sense> rhs; ``coeffs`` is a mapping or (name, coef) pairs.

        Repeated variables are merged and zero coefficients dropped.
        """
        merged: dict = {}
        for v, c in (coeffs.items() if isinstance(coeffs, dict) else coeffs):
            if v not in self.variables:
                raise ValueError(f"constraint {name!r} references undeclared variable {v!r}")
            merged[v] = merged.get(v, 0.0) + float(c)
        con = LinConstraint(tuple((v, c) for v, c in merged.items() if c != 0), sense, float(rhs),
                            name or f"c{len(self.constraints)}")
        self.constraints.append(con)
        return con

    def set_objective(self, sense: str, coeffs) -> None:
        if sense not in ("max", "min"):
            raise ValueError("objective sense must be 'max' or 'min'")
        items = tuple((v, float(c)) for v, c in (coeffs.items() if isinstance(coeffs, dict) else coeffs))
        for v, _ in items:
            if v not in self.variables:
                raise ValueError(f"objective references undeclared variable {v!r}")
        self.objective = (sense, items)

    def count(self, kind: str) -> int:
        return sum(1 for v in self.variables.values() if v.kind == kind)

    def violations(self, assignment: dict, tol: float = 1e-6) -> list:
        """Descriptions of every bound, integrality or constraint violation above ``tol`` (relative)."""
        out = []
        for v in self.variables.values():
            if v.name not in assignment:
                out.append(f"{v.name}: missing from assignment")
                continue
            x = assignment[v.name]
            if not math.isfinite(x):
                out.append(f"{v.name}: non-finite value {x}")
                continue
            t = tol * max(1.0, abs(x))
            if x < v.lb - t or x > v.ub + t:
                out.append(f"{v.name}: {x} outside [{v.lb}, {v.ub}]")
            if v.kind != CONTINUOUS and abs(x - round(x)) > tol:
                out.append(f"{v.name}: {x} is not integral")
        if out:
            return out
        for c in self.constraints:
            viol = c.violation(assignment)
            if viol > tol * c.scale(assignment):
                out.append(f"{c.name}: violated by {viol:.3g}")
        return out

    def check(self, assignment: dict, tol: float = 1e-6) -> bool:
        return not self.violations(assignment, tol)


@dataclass
class SolveVerdict:
    status: str
    witness: dict | None = None
    detail: str = ""

    def __post_init__(self):
        if self.status not in (FEASIBLE, INFEASIBLE, TIMEOUT, BACKEND_ERROR):
            raise ValueError(f"unknown solve status {self.status!r}")
        if self.status == FEASIBLE and self.witness is None:
            raise ValueError("a feasible verdict needs a witness")
