"""Solver backends.

* ``enumeration``: exact decision for encodings of finite regions; every
  region point is executed and the induced assignment checked.
* ``external``: runs a command template with ``{lp}`` / ``{sol}``
  placeholders; the solution file holds a status token on its first line
  followed by ``name value`` lines.
* ``highs``: in-process HiGHS through ``scipy.optimize.milp``.

Every Feasible verdict carries a witness that has been re-checked against
all constraints of the problem.
"""

from __future__ import annotations

import math
import os
import shlex
import subprocess
import tempfile
import time
from pathlib import Path

import numpy as np

from ..model import quantization_error
from .encode import Encoding
from .lp import emit_lp
from .problem import (
    BACKEND_ERROR,
    CONTINUOUS,
    FEASIBLE,
    INFEASIBLE,
    TIMEOUT,
    MilpProblem,
    SolveVerdict,
)

BACKENDS = ("auto", "enumeration", "external", "highs")
SOLVER_ENV = "QUANTERR_SOLVER_CMD"
DEFAULT_ENUM_CAP = 10**7
WITNESS_TOL = 1e-6
_CHUNK = 1 << 16

_STATUS = {
    "FEASIBLE": FEASIBLE,
    "OPTIMAL": FEASIBLE,
    "INFEASIBLE": INFEASIBLE,
    "TIMEOUT": TIMEOUT,
    "TIME_LIMIT": TIMEOUT,
    "ERROR": BACKEND_ERROR,
}


def _problem(target) -> MilpProblem:
    return target.problem if isinstance(target, Encoding) else target


def _validated(problem: MilpProblem, witness: dict, source: str) -> SolveVerdict:
    bad = problem.violations(witness, WITNESS_TOL)
    if bad:
        more = f" (+{len(bad) - 3} more)" if len(bad) > 3 else ""
        return SolveVerdict(BACKEND_ERROR, detail=f"{source} witness fails validation: {'; '.join(bad[:3])}{more}")
    return SolveVerdict(FEASIBLE, witness)


def solve_enumeration(enc: Encoding, timeout: float | None = None, cap: int = DEFAULT_ENUM_CAP) -> SolveVerdict:
    """Decide the encoding by executing both networks on every region point.

    The witness is the first point (lexicographic order) of largest |error|.
    """
    start_time = time.monotonic()
    total = enc.region.cardinality()
    if total > cap:
        return SolveVerdict(BACKEND_ERROR, detail=f"region has {total} points, above the enumeration cap of {cap}")
    best, best_idx = -1.0, -1
    for start in range(0, total, _CHUNK):
        if timeout is not None and time.monotonic() - start_time > timeout:
            return SolveVerdict(TIMEOUT, detail=f"enumerated {start} of {total} points")
        pts = enc.region.point_array(start, start + _CHUNK)
        err = np.abs(quantization_error(enc.net, enc.qnet, pts, enc.target))
        i = int(np.argmax(err))
        if err[i] >= enc.epsilon and err[i] > best:
            best, best_idx = float(err[i]), start + i
    if best_idx < 0:
        return SolveVerdict(INFEASIBLE)
    point = enc.region.point_array(best_idx, best_idx + 1)[0]
    verdict = _validated(enc.problem, enc.assignment(point), "enumeration")
    if verdict.status != FEASIBLE:
        # a real execution violating the encoding means the encoding is unsound
        verdict.detail = f"encoding rejects the execution on {tuple(int(v) for v in point)}: {verdict.detail}"
    return verdict


def read_solution(text: str) -> tuple[str, dict]:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty solution file")
    token = lines[0].split()[0].upper()
    if token not in _STATUS:
        raise ValueError(f"unknown status token {lines[0]!r}")
    values = {}
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"malformed solution line {ln!r}")
        values[parts[0]] = float(parts[1])
    return _STATUS[token], values


def write_solution(path, status: str, values: dict) -> None:
    body = [status] + [f"{k} {v!r}" for k, v in values.items()]
    Path(path).write_text("\n".join(body) + "\n", encoding="utf-8")


def solve_external(target, command: str, timeout: float | None = None) -> SolveVerdict:
    problem = _problem(target)
    if not command or not command.strip():
        return SolveVerdict(BACKEND_ERROR, detail="no external solver command configured")
    with tempfile.TemporaryDirectory(prefix="quanterr-") as tmp:
        lp = os.path.join(tmp, "problem.lp")
        sol = os.path.join(tmp, "problem.sol")
        Path(lp).write_text(emit_lp(problem), encoding="utf-8")
        argv = [t.replace("{lp}", lp).replace("{sol}", sol) for t in shlex.split(command)]
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout)
        except subprocess.TimeoutExpired:
            return SolveVerdict(TIMEOUT, detail=f"solver exceeded {timeout} s")
        except OSError as e:
            return SolveVerdict(BACKEND_ERROR, detail=f"cannot run solver: {e}")
        if not os.path.exists(sol):
            tail = (proc.stderr or proc.stdout).strip().splitlines()[-3:]
            return SolveVerdict(BACKEND_ERROR, detail=f"solver exited with {proc.returncode} and no solution file: "
                                                      + " | ".join(tail))
        try:
            status, values = read_solution(Path(sol).read_text(encoding="utf-8"))
        except ValueError as e:
            return SolveVerdict(BACKEND_ERROR, detail=str(e))
    if status == FEASIBLE:
        return _validated(problem, values, "external")
    if status == BACKEND_ERROR:
        return SolveVerdict(BACKEND_ERROR, detail=f"solver reported an error (exit {proc.returncode})")
    return SolveVerdict(status)


def solve_highs(target, timeout: float | None = None) -> SolveVerdict:
    """In-process HiGHS via scipy."""
    from scipy.optimize import Bounds, LinearConstraint, milp
    from scipy.sparse import coo_array

    problem = _problem(target)
    names = list(problem.variables)
    if not names:
        return SolveVerdict(FEASIBLE, {})
    index = {n: i for i, n in enumerate(names)}
    c = np.zeros(len(names))
    if problem.objective is not None:
        sense, coeffs = problem.objective
        for v, a in coeffs:
            c[index[v]] += -a if sense == "max" else a
    rows, cols, vals, cl, cu = [], [], [], [], []
    for r, con in enumerate(problem.constraints):
        for v, a in con.coeffs:
            rows.append(r)
            cols.append(index[v])
            vals.append(a)
        cl.append(-math.inf if con.sense == "<=" else con.rhs)
        cu.append(math.inf if con.sense == ">=" else con.rhs)
    cons = []
    if problem.constraints:
        a = coo_array((vals, (rows, cols)), shape=(len(problem.constraints), len(names))).tocsr()
        cons = [LinearConstraint(a, cl, cu)]
    var = problem.variables.values()
    integrality = np.array([0 if v.kind == CONTINUOUS else 1 for v in var])
    bounds = Bounds([v.lb for v in var], [v.ub for v in var])
    options = {"disp": False}
    if timeout is not None:
        options["time_limit"] = float(timeout)
    try:
        res = milp(c, constraints=cons, integrality=integrality, bounds=bounds, options=options)
    except Exception as e:  # scipy raises a variety of types on malformed input
        return SolveVerdict(BACKEND_ERROR, detail=f"highs: {e}")
    if res.x is not None and res.status in (0, 1):
        return _validated(problem, dict(zip(names, map(float, res.x))), "highs")
    if res.status == 2:
        return SolveVerdict(INFEASIBLE)
    if res.status == 1:
        return SolveVerdict(TIMEOUT, detail=res.message)
    return SolveVerdict(BACKEND_ERROR, detail=f"highs: {res.message}")


def resolve_backend(name: str, target, command: str | None = None, cap: int = DEFAULT_ENUM_CAP) -> str:
    """Pick a concrete backend for ``auto``: external if configured, enumeration if small, else highs."""
    if name != "auto":
        return name
    if command:
        return "external"
    if isinstance(target, Encoding) and target.region.cardinality() <= cap:
        return "enumeration"
    return "highs"


def solve(target, backend: str = "auto", command: str | None = None, timeout: float | None = None,
          cap: int = DEFAULT_ENUM_CAP) -> SolveVerdict:
    """Solve an Encoding (or a bare MilpProblem for the solver backends)."""
    if backend not in BACKENDS:
        return SolveVerdict(BACKEND_ERROR, detail=f"unknown backend {backend!r}")
    if command is None:
        command = os.environ.get(SOLVER_ENV)
    backend = resolve_backend(backend, target, command, cap)
    problem = _problem(target)
    if not problem.variables and not problem.constraints:
        return SolveVerdict(FEASIBLE, {})
    if backend == "enumeration":
        if not isinstance(target, Encoding):
            return SolveVerdict(BACKEND_ERROR, detail="the enumeration backend needs a network encoding")
        return solve_enumeration(target, timeout, cap)
    if backend == "external":
        return solve_external(target, command or "", timeout)
    return solve_highs(target, timeout)


def witness_error(enc: Encoding, witness: dict) -> tuple[tuple, float]:
    """Decoded input of a witness and its true signed error."""
    x = enc.decode(witness)
    return x, float(quantization_error(enc.net, enc.qnet, np.array(x), enc.target))
