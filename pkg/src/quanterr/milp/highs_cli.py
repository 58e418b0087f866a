"""Reference external solver: ``python -m quanterr.milp.highs_cli PROBLEM.lp SOLUTION.sol [TIME_LIMIT]``.

Reads the LP file with HiGHS and writes the solution-file protocol used by
the external backend.
"""

from __future__ import annotations

import sys

from .solve import write_solution


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) not in (2, 3):
        print("usage: highs_cli PROBLEM.lp SOLUTION.sol [TIME_LIMIT]", file=sys.stderr)
        return 2
    lp, sol = argv[0], argv[1]
    try:
        import highspy
    except ImportError:
        write_solution(sol, "ERROR", {})
        print("highspy is not installed", file=sys.stderr)
        return 3
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    if len(argv) == 3:
        h.setOptionValue("time_limit", float(argv[2]))
    if h.readModel(lp) == highspy.HighsStatus.kError:
        write_solution(sol, "ERROR", {})
        return 3
    h.run()
    status = h.getModelStatus()
    ms = highspy.HighsModelStatus
    if status == ms.kOptimal:
        names = h.getLp().col_names_
        values = h.getSolution().col_value
        write_solution(sol, "FEASIBLE", dict(zip(names, values)))
    elif status == ms.kInfeasible:
        write_solution(sol, "INFEASIBLE", {})
    elif status == ms.kTimeLimit:
        # a feasible incumbent already answers a feasibility question
        if h.getInfo().primal_solution_status == 2:
            write_solution(sol, "FEASIBLE", dict(zip(h.getLp().col_names_, h.getSolution().col_value)))
        else:
            write_solution(sol, "TIMEOUT", {})
    else:
        write_solution(sol, "ERROR", {})
        print(f"highs status: {h.modelStatusToString(status)}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
