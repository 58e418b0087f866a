"""Command-line interface.

Exit codes: 0 Proved (or success), 1 Falsified, 2 Unknown, 3 usage or input
error, 4 runtime or solver-backend error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import dra as dra_mod
from .io import load_network, load_quantized, load_scheme, save_quantized
from .milp import build_problem, emit_lp, solve, witness_error
from .milp.problem import FEASIBLE, INFEASIBLE, TIMEOUT
from .milp.solve import BACKENDS, DEFAULT_ENUM_CAP, SOLVER_ENV
from .model import (
    InputRegion,
    QuantizationError,
    check_pair,
    predicted_class,
    quantize_network,
)
from .oracle import CapacityError, enumerate_errors
from .report import Report

EXIT = {"Proved": 0, "Falsified": 1, "Unknown": 2, "Error": 4, "": 0}
EXIT_USAGE = 3
EXIT_RUNTIME = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------
# Argument handling
# --------------------------------------------------------------------------


def _pair_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", required=True, help="DNN model file (JSON)")
    p.add_argument("--scheme", help="quantization scheme: JSON file or inline 'w=±,4,2;b=±,4,2;in=+,4,4;h=+,4,2'")
    p.add_argument("--qmodel", help="quantized model file; quantizes --model with --scheme when omitted")


def _region_args(p: argparse.ArgumentParser, need_eps: bool) -> None:
    p.add_argument("--center", required=True, help="integer input center, comma separated, or a JSON file")
    p.add_argument("--radius", type=int, required=True, help="L-infinity radius in integer steps")
    p.add_argument("--class", dest="target", default="predicted",
                   help="0-based output index or 'predicted' (DNN argmax at the center)")
    p.add_argument("--epsilon", type=float, required=need_eps, help="error bound")


def _report_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--report", help="also write the report to this file")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="quanterr", description="Bound the output error between a ReLU network and its quantized version.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("verify", help="difference analysis, then MILP if needed")
    _pair_args(v)
    _region_args(v, True)
    v.add_argument("--dra", choices=dra_mod.METHODS, default="symbolic")
    v.add_argument("--milp", choices=("off", "on", "hints"), default="hints")
    v.add_argument("--backend", choices=BACKENDS, default="auto")
    v.add_argument("--solver-cmd", help=f"external solver command with {{lp}} and {{sol}} placeholders "
                                        f"(default: ${SOLVER_ENV})")
    v.add_argument("--timeout", type=float, default=3600.0, help="wall-clock limit in seconds")
    v.add_argument("--enumerate-cap", type=int, default=DEFAULT_ENUM_CAP)
    _report_arg(v)

    a = sub.add_parser("analyze", help="per-neuron intervals of a difference analysis")
    _pair_args(a)
    _region_args(a, False)
    a.add_argument("--dra", choices=dra_mod.METHODS + ("combined",), default="symbolic")
    _report_arg(a)

    q = sub.add_parser("quantize", help="write the quantized model")
    q.add_argument("--model", required=True)
    q.add_argument("--scheme", required=True)
    q.add_argument("--output", required=True)

    e = sub.add_parser("export-milp", help="write the MILP in LP format without solving")
    _pair_args(e)
    _region_args(e, True)
    e.add_argument("--dra", choices=dra_mod.METHODS, default="symbolic", help="analysis used for hints")
    e.add_argument("--milp", choices=("on", "hints"), default="hints")
    e.add_argument("--no-simplify", action="store_true", help="keep full gadgets on stable neurons")
    e.add_argument("--output", required=True)

    o = sub.add_parser("oracle", help="exact error extrema by enumeration")
    _pair_args(o)
    _region_args(o, False)
    o.add_argument("--enumerate-cap", type=int, default=DEFAULT_ENUM_CAP)
    _report_arg(o)
    return ap


def _load_pair(args):
    net = load_network(args.model)
    if args.qmodel:
        qnet = load_quantized(args.qmodel)
        if args.scheme and load_scheme(args.scheme) != qnet.scheme:
            raise UsageError("--scheme disagrees with the scheme stored in --qmodel")
    elif args.scheme:
        qnet = quantize_network(net, load_scheme(args.scheme))
    else:
        raise UsageError("either --scheme or --qmodel is required")
    check_pair(net, qnet)
    return net, qnet


def _center(text: str) -> tuple:
    p = Path(text)
    if p.suffix == ".json" and p.is_file():
        vals = json.loads(p.read_text(encoding="utf-8"))
    else:
        vals = [v for v in text.replace(" ", "").split(",") if v]
    try:
        out = tuple(int(v) for v in vals)
    except (TypeError, ValueError):
        raise UsageError(f"center must be integers, got {text!r}") from None
    if any(float(a) != float(b) for a, b in zip(out, vals)):
        raise UsageError(f"center must be integers, got {text!r}")
    return out


def _setup(args):
    net, qnet = _load_pair(args)
    if args.radius < 0:
        raise UsageError("radius must be non-negative")
    center = _center(args.center)
    if len(center) != net.n_inputs:
        raise UsageError(f"center has {len(center)} coordinates, model expects {net.n_inputs}")
    region = InputRegion(center, args.radius, qnet.scheme.input)
    if args.target == "predicted":
        g = predicted_class(net, qnet, center)
    else:
        try:
            g = int(args.target)
        except ValueError:
            raise UsageError(f"--class must be an integer or 'predicted', got {args.target!r}") from None
        if not 0 <= g < net.n_outputs:
            raise UsageError(f"class {g} out of range for {net.n_outputs} outputs")
    if args.epsilon is not None and not args.epsilon > 0:
        raise UsageError("epsilon must be positive")
    return net, qnet, region, g


def _add_dra_tables(rep: Report, res) -> None:
    rep.add_table("delta_in", res.delta_in)
    rep.add_table("delta", res.delta)


def _output_values(rep: Report, res, g: int) -> None:
    lo, hi = res.output[g]
    rep.values["output_lb"] = float(lo)
    rep.values["output_ub"] = float(hi)


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def cmd_verify(args) -> Report:
    t0 = time.monotonic()
    net, qnet, region, g = _setup(args)
    eps = args.epsilon
    rep = Report("verify")
    rep.values.update({"target": g, "epsilon": float(eps), "dra": args.dra, "milp": args.milp,
                       "region_points": region.cardinality()})
    res = dra_mod.run(args.dra, net, qnet, region)
    rep.timings["dra"] = time.monotonic() - t0
    _add_dra_tables(rep, res)
    _output_values(rep, res, g)
    if res.verdict(g, eps) == "Proved":
        rep.verdict, rep.stage = "Proved", "DRA"
        return rep
    if args.milp == "off":
        rep.verdict, rep.stage = "Unknown", "DRA"
        return rep

    t1 = time.monotonic()
    enc = build_problem(net, qnet, region, g, eps, dra=res, hints=args.milp == "hints")
    rep.values["milp_variables"] = len(enc.problem.variables)
    rep.values["milp_constraints"] = len(enc.problem.constraints)
    remaining = max(args.timeout - (t1 - t0), 0.0)
    cmd = args.solver_cmd or os.environ.get(SOLVER_ENV)
    v = solve(enc, args.backend, command=cmd, timeout=remaining, cap=args.enumerate_cap)
    rep.timings["milp"] = time.monotonic() - t1
    rep.stage = "MILP"
    if v.status == INFEASIBLE:
        rep.verdict = "Proved"
    elif v.status == FEASIBLE:
        x, err = witness_error(enc, v.witness)
        rep.values["witness_error"] = err
        if abs(err) >= eps:
            rep.verdict, rep.witness = "Falsified", x
        else:
            # accepted by the solver within tolerance but not a real violation
            rep.verdict, rep.detail = "Unknown", f"solver witness {x} has error {err!r} below epsilon"
    elif v.status == TIMEOUT:
        rep.verdict, rep.detail = "Unknown", f"timeout {v.detail}".strip()
    else:
        rep.verdict, rep.detail = "Error", v.detail
    return rep


def cmd_analyze(args) -> Report:
    t0 = time.monotonic()
    net, qnet, region, g = _setup(args)
    rep = Report("analyze")
    rep.values.update({"target": g, "dra": args.dra})
    if args.dra == "combined":
        res = dra_mod.combine(dra_mod.propagate_interval(net, qnet, region),
                              dra_mod.propagate_symbolic(net, qnet, region))
    else:
        res = dra_mod.run(args.dra, net, qnet, region)
    rep.timings["dra"] = time.monotonic() - t0
    _output_values(rep, res, g)
    if args.epsilon is not None:
        rep.values["epsilon"] = float(args.epsilon)
        rep.verdict, rep.stage = res.verdict(g, args.epsilon), "DRA"
    rep.add_table("dnn_pre", [l.pre for l in res.dnn])
    rep.add_table("dnn_post", [l.post for l in res.dnn])
    rep.add_table("qnn_pre", [l.pre for l in res.qnn])
    rep.add_table("qnn_post", [l.post for l in res.qnn])
    _add_dra_tables(rep, res)
    return rep


def cmd_quantize(args) -> Report:
    net = load_network(args.model)
    qnet = quantize_network(net, load_scheme(args.scheme))
    save_quantized(qnet, args.output)
    rep = Report("quantize")
    rep.values["output"] = args.output
    rep.values["scheme"] = ";".join(f"{k}={v[0]},{v[1]},{v[2]}" for k, v in qnet.scheme.to_dict().items())
    return rep


def cmd_export_milp(args) -> Report:
    net, qnet, region, g = _setup(args)
    res = dra_mod.run(args.dra, net, qnet, region)
    enc = build_problem(net, qnet, region, g, args.epsilon, dra=res, hints=args.milp == "hints",
                        simplify=not args.no_simplify)
    Path(args.output).write_text(emit_lp(enc.problem), encoding="utf-8")
    p = enc.problem
    rep = Report("export-milp")
    rep.values.update({"output": args.output, "target": g, "variables": len(p.variables),
                       "constraints": len(p.constraints), "binaries": p.count("binary"),
                       "integers": p.count("integer"), "hints": enc.hints})
    return rep


def cmd_oracle(args) -> Report:
    t0 = time.monotonic()
    net, qnet, region, g = _setup(args)
    res = enumerate_errors(net, qnet, region, g, cap=args.enumerate_cap)
    rep = Report("oracle")
    rep.timings["oracle"] = time.monotonic() - t0
    rep.values.update({"target": g, "points": res.points_evaluated, "max_error": res.max_error,
                       "min_error": res.min_error, "max_abs_error": res.max_abs_error,
                       "argmax": " ".join(str(v) for v in res.argmax)})
    if args.epsilon is not None:
        rep.values["epsilon"] = float(args.epsilon)
        rep.stage = "oracle"
        if res.max_abs_error < args.epsilon:
            rep.verdict = "Proved"
        else:
            rep.verdict, rep.witness = "Falsified", res.argmax
    return rep


COMMANDS = {
    "verify": cmd_verify,
    "analyze": cmd_analyze,
    "quantize": cmd_quantize,
    "export-milp": cmd_export_milp,
    "oracle": cmd_oracle,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        rep = COMMANDS[args.command](args)
    except (UsageError, QuantizationError, FileNotFoundError, CapacityError, ValueError) as e:
        print(f"quanterr: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (dra_mod.SoundnessError, RuntimeError, OSError) as e:
        print(f"quanterr: runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    text = rep.to_text()
    sys.stdout.write(text)
    if getattr(args, "report", None):
        Path(args.report).write_text(text, encoding="utf-8")
    return EXIT[rep.verdict]


if __name__ == "__main__":
    sys.exit(main())
