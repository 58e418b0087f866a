import sys

import pytest

from quanterr.dra import propagate_interval, propagate_symbolic
from quanterr.milp import (
    BINARY,
    FEASIBLE,
    INFEASIBLE,
    MilpProblem,
    SolveVerdict,
    build_problem,
    encode_error_objective,
    encode_region,
    solve,
    witness_error,
)
from quanterr.milp.problem import BACKEND_ERROR, CONTINUOUS, TIMEOUT, LinConstraint, MilpVar
from quanterr.milp.solve import read_solution, solve_enumeration, solve_external, solve_highs
from quanterr.model import InputRegion, QuantConfig, QuantScheme
from quanterr.oracle import enumerate_errors
from conftest import random_instances

SHIM = f"{sys.executable} -m quanterr.milp.highs_cli {{lp}} {{sol}}"


def _structural_violations(enc, assignment):
    return [v for v in enc.problem.violations(assignment) if not v.startswith("abs_error_ge_eps")]


def _count(enc, prefix):
    return sum(1 for c in enc.problem.constraints if c.name.startswith(prefix))


def test_dnn_gadget_selection(pair, region3):
    enc = build_problem(*pair, region3, 0, 0.1)
    assert enc.dnn_gadgets[1, 0] == "identity" and _count(enc, "dnn_1_0") == 1
    assert enc.dnn_gadgets[1, 1] == "relu" and _count(enc, "dnn_1_1") == 4
    assert "a_1_1" in enc.problem.variables and "a_1_0" not in enc.problem.variables


def test_qnn_gadget_selection(pair, region3):
    enc = build_problem(*pair, region3, 0, 0.1)
    assert enc.qnn_gadgets[1, 0] == "round"
    assert not any(n.startswith(("bl_1_0", "bu_1_0")) for n in enc.problem.variables)
    assert enc.qnn_gadgets[1, 1] == "max"
    assert enc.problem.variables["bl_1_1"].kind == BINARY and "bu_1_1" not in enc.problem.variables


def test_encode_region():
    p = MilpProblem()
    r = InputRegion((9, 6), 3, QuantConfig(False, 4, 4))
    q, d = encode_region(p, r, QuantScheme.parse("w=±,4,2;b=±,4,2;in=+,4,4;h=+,4,2"))
    assert (p.variables[q[0]].lb, p.variables[q[0]].ub) == (6, 12)
    assert (p.variables[q[1]].lb, p.variables[q[1]].ub) == (3, 9)
    assert p.check({q[0]: 9, q[1]: 6, d[0]: 9 / 15, d[1]: 6 / 15})
    p0 = MilpProblem()
    q0, _ = encode_region(p0, InputRegion((15, 0), 0, QuantConfig(False, 4, 4)), QuantScheme.parse("w=±,4,2;b=±,4,2;in=+,4,4;h=+,4,2"))
    assert p0.variables[q0[0]].lb == p0.variables[q0[0]].ub == 15
    p1 = MilpProblem()
    q1, _ = encode_region(p1, InputRegion((15, 0), 2, QuantConfig(False, 4, 4)), QuantScheme.parse("w=±,4,2;b=±,4,2;in=+,4,4;h=+,4,2"))
    assert (p1.variables[q1[0]].lb, p1.variables[q1[0]].ub) == (13, 15)
    assert (p1.variables[q1[1]].lb, p1.variables[q1[1]].ub) == (0, 2)


def _gadget_problem(eps=None):
    p = MilpProblem()
    p.add_var("qo", CONTINUOUS, -8, 8)
    p.add_var("do", CONTINUOUS, -2, 2)
    encode_error_objective(p, "qo", "do", eps, 2, (-4.0, 4.0))
    return p


def test_error_gadget_fixed_values():
    p = _gadget_problem(0.1)
    # d = 0.25 qo - do
    assert p.check({"qo": 1.2, "do": 0.0, "eta": 0.3, "v": 1})
    assert p.check({"qo": 0.0, "do": 0.2, "eta": 0.0, "v": 0})
    assert not p.check({"qo": 1.2, "do": 0.0, "eta": 0.0, "v": 0})
    assert not p.check({"qo": 0.0, "do": 0.2, "eta": 0.1, "v": 1})
    # |d| = 0.05 < 0.1 has no valid completion
    assert not p.check({"qo": 0.2, "do": 0.0, "eta": 0.05, "v": 1})
    with pytest.raises(ValueError):
        _gadget_problem(0.0)


def test_theta_g_only_counts():
    p = _gadget_problem()
    assert len(p.constraints) == 4 and p.count(BINARY) == 1


def test_hint_constraints(pair, region3):
    net, qnet = pair
    dra = propagate_interval(net, qnet, region3)
    enc = build_problem(net, qnet, region3, 0, 0.1, dra=dra, hints=True)
    lo = next(c for c in enc.problem.constraints if c.name == "hint_1_1_lo")
    hi = next(c for c in enc.problem.constraints if c.name == "hint_1_1_hi")
    assert dict(lo.coeffs) == {"q_1_1": 0.25, "d_1_1": -1.0} and lo.rhs == pytest.approx(-0.2)
    assert hi.rhs == pytest.approx(0.123125)
    assert enc.hints == 4
    with pytest.raises(ValueError):
        build_problem(net, qnet, region3, 0, 0.1, hints=True)


def test_traces_satisfy_example_encoding(pair, region3):
    net, qnet = pair
    dra = propagate_symbolic(net, qnet, region3)
    for simplify in (True, False):
        enc = build_problem(net, qnet, region3, 0, 0.01, dra=dra, hints=True, simplify=simplify)
        for pt in region3.points():
            assert not _structural_violations(enc, enc.assignment(pt)), pt


def test_case_elimination_accepts_same_inputs():
    for net, qnet, region, g in random_instances(40, seed=11):
        dra = propagate_symbolic(net, qnet, region)
        encs = [build_problem(net, qnet, region, g, 1.0, dra=dra, hints=True, simplify=s) for s in (True, False)]
        for pt in region.point_array():
            for enc in encs:
                assert not _structural_violations(enc, enc.assignment(pt))


def test_encoding_is_functional_under_highs():
    """With the input fixed, the solver can only reach the true error, in both encodings."""
    for net, qnet, region, g in random_instances(6, seed=12, max_radius=1):
        pt = region.point_array(0, 1)[0]
        true = enumerate_errors(net, qnet, InputRegion(tuple(pt), 0, region.config), g).max_error
        for simplify in (True, False):
            enc = build_problem(net, qnet, region, g, 1.0, simplify=simplify)
            p = enc.problem
            p.constraints = [c for c in p.constraints if c.name != "abs_error_ge_eps"]
            for j, v in enumerate(pt):
                p.add({f"qin_{j}": 1.0}, "=", float(v), f"fix_{j}")
            h = 2.0**-qnet.scheme.hidden.frac
            last = qnet.n_affine
            d = {f"q_{last}_{g}": h, f"d_{last}_{g}": -1.0}
            for sense in ("max", "min"):
                p.set_objective(sense, d)
                v = solve_highs(p)
                assert v.status == FEASIBLE
                got = h * v.witness[f"q_{last}_{g}"] - v.witness[f"d_{last}_{g}"]
                assert got == pytest.approx(true, abs=1e-6)


def test_enumeration_matches_oracle():
    for net, qnet, region, g in random_instances(30, seed=13):
        m = enumerate_errors(net, qnet, region, g).max_abs_error
        dra = propagate_symbolic(net, qnet, region)
        for f in (0.5, 1.0, 2.0):
            eps = max(m * f, 1e-6)
            want = FEASIBLE if m >= eps else INFEASIBLE
            for hints in (False, True):
                v = solve(build_problem(net, qnet, region, g, eps, dra=dra, hints=hints), "enumeration")
                assert v.status == want
                if v.status == FEASIBLE:
                    assert v.witness is not None


def test_example_verdicts(pair, region1):
    net, qnet = pair
    feas = solve(build_problem(net, qnet, region1, 0, 0.05), "enumeration")
    assert feas.status == FEASIBLE
    enc = build_problem(net, qnet, region1, 0, 0.05)
    x, err = witness_error(enc, feas.witness)
    assert x == (9, 6) and abs(err) >= 0.05
    assert solve(build_problem(net, qnet, region1, 0, 0.07), "enumeration").status == INFEASIBLE


@pytest.mark.parametrize("backend", ["highs", "external"])
def test_solver_backends_spot_check(backend):
    for net, qnet, region, g in random_instances(20, seed=14):
        m = enumerate_errors(net, qnet, region, g).max_abs_error
        eps = max(m * (0.5 if g % 2 else 2.0), 1e-6)
        dra = propagate_symbolic(net, qnet, region)
        enc = build_problem(net, qnet, region, g, eps, dra=dra, hints=True)
        v = solve(enc, backend, command=SHIM, timeout=60)
        want = FEASIBLE if m >= eps else INFEASIBLE
        assert v.status == want, v.detail
        if v.status == FEASIBLE:
            assert enc.problem.check(v.witness, 1e-6)
            _, err = witness_error(enc, v.witness)
            assert abs(err) >= eps - 1e-6


def test_empty_problem_is_feasible():
    for b in ("highs", "enumeration", "auto"):
        v = solve(MilpProblem(), b)
        assert v.status == FEASIBLE and v.witness == {}


def test_enumeration_needs_encoding():
    p = MilpProblem()
    p.add_var("x", CONTINUOUS, 0, 1)
    assert solve(p, "enumeration").status == BACKEND_ERROR


def test_enumeration_cap_and_timeout(pair, region3):
    enc = build_problem(*pair, region3, 0, 0.1)
    assert solve_enumeration(enc, cap=10).status == BACKEND_ERROR
    assert solve_enumeration(enc, timeout=-1.0).status == TIMEOUT


def test_external_protocol_errors(pair, region1, tmp_path):
    enc = build_problem(*pair, region1, 0, 0.05)
    assert solve_external(enc, "").status == BACKEND_ERROR
    assert solve_external(enc, "/nonexistent/solver {lp} {sol}").status == BACKEND_ERROR
    assert solve_external(enc, f"{sys.executable} -c pass").status == BACKEND_ERROR
    assert solve_external(enc, f"{sys.executable} -c 'import time; time.sleep(5)'", timeout=0.3).status == TIMEOUT
    bogus = tmp_path / "bogus.py"
    bogus.write_text("import sys\nopen(sys.argv[2], 'w').write('FEASIBLE\\nqin_0 99\\n')\n")
    v = solve_external(enc, f"{sys.executable} {bogus} {{lp}} {{sol}}")
    assert v.status == BACKEND_ERROR and "validation" in v.detail
    infeas = tmp_path / "inf.py"
    infeas.write_text("import sys\nopen(sys.argv[2], 'w').write('INFEASIBLE\\n')\n")
    assert solve_external(enc, f"{sys.executable} {infeas} {{lp}} {{sol}}").status == INFEASIBLE


def test_solver_env_variable(pair, region1, monkeypatch):
    monkeypatch.setenv("QUANTERR_SOLVER_CMD", SHIM)
    enc = build_problem(*pair, region1, 0, 0.05)
    v = solve(enc, "auto")
    assert v.status == FEASIBLE


def test_read_solution():
    assert read_solution("OPTIMAL\nx 1.5\ny -2\n") == (FEASIBLE, {"x": 1.5, "y": -2.0})
    assert read_solution("infeasible\n")[0] == INFEASIBLE
    with pytest.raises(ValueError):
        read_solution("")
    with pytest.raises(ValueError):
        read_solution("MAYBE\n")


def test_problem_types():
    with pytest.raises(ValueError):
        MilpVar("x", "real")
    with pytest.raises(ValueError):
        MilpVar("x", CONTINUOUS, 2, 1)
    assert (MilpVar("b", BINARY, -5, 5).lb, MilpVar("b", BINARY, -5, 5).ub) == (0, 1)
    with pytest.raises(ValueError):
        LinConstraint((("x", 0.0),), "<=", 1.0)
    with pytest.raises(ValueError):
        LinConstraint((("x", 1.0),), "<", 1.0)
    p = MilpProblem()
    p.add_var("x")
    with pytest.raises(ValueError):
        p.add_var("x")
    with pytest.raises(ValueError):
        p.add({"y": 1.0}, "<=", 0)
    c = p.add([("x", 1.0), ("x", 2.0)], "<=", 3.0)
    assert c.coeffs == (("x", 3.0),)
    with pytest.raises(ValueError):
        SolveVerdict(FEASIBLE)
