"""MILP encoding of the error-bound property, LP export and solver backends."""

from .encode import (
    Encoding,
    build_problem,
    encode_diff_hints,
    encode_dnn,
    encode_error_objective,
    encode_qnn,
    encode_region,
)
from .lp import emit_lp, parse_lp
from .problem import (
    BACKEND_ERROR,
    BINARY,
    CONTINUOUS,
    FEASIBLE,
    INFEASIBLE,
    INTEGER,
    TIMEOUT,
    LinConstraint,
    MilpProblem,
    MilpVar,
    SolveVerdict,
)
from .solve import BACKENDS, SOLVER_ENV, solve, witness_error

__all__ = [
    "BACKENDS", "BACKEND_ERROR", "BINARY", "CONTINUOUS", "Encoding", "FEASIBLE", "INFEASIBLE", "INTEGER",
    "LinConstraint", "MilpProblem", "MilpVar", "SOLVER_ENV", "SolveVerdict", "TIMEOUT", "build_problem",
    "emit_lp", "encode_diff_hints", "encode_dnn", "encode_error_objective", "encode_qnn", "encode_region",
    "parse_lp", "solve", "witness_error",
]
