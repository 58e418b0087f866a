import json
import sys
from pathlib import Path

import pytest

from quanterr.cli import main
from quanterr.io import load_quantized
from quanterr.milp import parse_lp
from quanterr.report import Report

MODELS = Path(__file__).resolve().parents[1] / "models"
PAIR = ["--model", str(MODELS / "example_dnn.json"), "--scheme", str(MODELS / "example_scheme.json")]
SHIM = f"{sys.executable} -m quanterr.milp.highs_cli {{lp}} {{sol}}"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, (Report.parse(out.out) if out.out else None), out.err


def test_verify_proved_by_dra(capsys):
    code, rep, _ = run(capsys, "verify", *PAIR, "--center", "9,6", "--radius", "3", "--epsilon", "0.25")
    assert code == 0 and rep.verdict == "Proved" and rep.stage == "DRA"
    assert rep.values["output_lb"] == pytest.approx(-0.19721875)
    assert rep.values["output_ub"] == pytest.approx(0.2045)


@pytest.mark.parametrize("backend", ["enumeration", "highs", "external"])
def test_verify_milp_verdicts(capsys, backend):
    common = ["verify", *PAIR, "--center", "9,6", "--radius", "1", "--class", "0", "--backend", backend,
              "--solver-cmd", SHIM]
    code, rep, _ = run(capsys, *common, "--epsilon", "0.07")
    assert code == 0 and rep.verdict == "Proved" and rep.stage == "MILP"
    code, rep, _ = run(capsys, *common, "--epsilon", "0.05")
    assert code == 1 and rep.verdict == "Falsified"
    assert rep.witness == (9, 6) and abs(rep.values["witness_error"]) >= 0.05


def test_verify_milp_off_is_unknown(capsys):
    code, rep, _ = run(capsys, "verify", *PAIR, "--center", "9,6", "--radius", "1", "--epsilon", "0.05",
                       "--milp", "off")
    assert code == 2 and rep.verdict == "Unknown"


def test_verify_backend_error_exit(capsys):
    code, rep, _ = run(capsys, "verify", *PAIR, "--center", "9,6", "--radius", "1", "--epsilon", "0.05",
                       "--backend", "external", "--solver-cmd", "/nonexistent/solver {lp} {sol}")
    assert code == 4 and rep.verdict == "Error"


def test_verify_writes_report(capsys, tmp_path):
    out = tmp_path / "r.txt"
    code, rep, _ = run(capsys, "verify", *PAIR, "--center", "9,6", "--radius", "3", "--epsilon", "0.25",
                       "--report", str(out))
    assert Report.parse(out.read_text()) == rep


def test_quantize_reproduces_weights(capsys, tmp_path):
    out = tmp_path / "q.json"
    code, _, _ = run(capsys, "quantize", "--model", PAIR[1], "--scheme", "w=±,4,2;b=±,4,2;in=+,4,4;h=+,4,2",
                     "--output", str(out))
    assert code == 0
    q = load_quantized(out)
    assert [w.tolist() for w in q.weights] == [[[5, -1], [-3, 3]], [[1, 3]]]
    code, rep, _ = run(capsys, "oracle", "--model", PAIR[1], "--qmodel", str(out), "--center", "9,6",
                       "--radius", "1")
    assert code == 0 and rep.values["max_abs_error"] == pytest.approx(0.067)


def test_analyze_tables(capsys):
    code, rep, _ = run(capsys, "analyze", *PAIR, "--center", "9,6", "--radius", "3", "--dra", "interval")
    assert code == 0
    delta = {(l, j): (lo, hi) for l, j, lo, hi in rep.tables["delta"]}
    assert delta[2, 0] == pytest.approx((-0.24459375, 0.117625))
    din = {(l, j): (lo, hi) for l, j, lo, hi in rep.tables["delta_in"]}
    assert din[1, 0] == pytest.approx((-0.194375, 0.133125))
    assert delta[1, 1] == pytest.approx((-0.2, 0.123125))
    assert set(rep.tables) >= {"dnn_pre", "dnn_post", "qnn_pre", "qnn_post"}
    code, rep, _ = run(capsys, "analyze", *PAIR, "--center", "9,6", "--radius", "3", "--dra", "combined",
                       "--epsilon", "0.1")
    assert code == 2 and rep.verdict == "Unknown"


def test_export_milp(capsys, tmp_path):
    out = tmp_path / "p.lp"
    code, rep, _ = run(capsys, "export-milp", *PAIR, "--center", "9,6", "--radius", "3", "--epsilon", "0.1",
                       "--output", str(out))
    assert code == 0 and rep.values["hints"] == 4
    p = parse_lp(out.read_text())
    assert len(p.variables) == rep.values["variables"] and len(p.constraints) == rep.values["constraints"]
    code, rep2, _ = run(capsys, "export-milp", *PAIR, "--center", "9,6", "--radius", "3", "--epsilon", "0.1",
                        "--output", str(out), "--no-simplify", "--milp", "on")
    assert rep2.values["constraints"] > rep.values["constraints"] - 4 and rep2.values["hints"] == 0


def test_oracle_command(capsys):
    code, rep, _ = run(capsys, "oracle", *PAIR, "--center", "9,6", "--radius", "3")
    assert code == 0
    assert rep.values["min_error"] == pytest.approx(-0.15217, abs=1e-5)
    assert rep.values["argmax"] == "6 8" and rep.values["points"] == 49
    code, rep, _ = run(capsys, "oracle", *PAIR, "--center", "9,6", "--radius", "3", "--epsilon", "0.1")
    assert code == 1 and rep.witness == (6, 8)
    code, _, err = run(capsys, "oracle", *PAIR, "--center", "9,6", "--radius", "3", "--enumerate-cap", "10")
    assert code == 3 and "error" in err


@pytest.mark.parametrize("argv", [
    ["verify", *PAIR, "--center", "9,6", "--radius", "1"],
    ["verify", *PAIR, "--center", "9,6", "--radius", "1", "--epsilon", "0"],
    ["verify", *PAIR, "--center", "9,6,1", "--radius", "1", "--epsilon", "0.1"],
    ["verify", *PAIR, "--center", "9.5,6", "--radius", "1", "--epsilon", "0.1"],
    ["verify", *PAIR, "--center", "16,6", "--radius", "1", "--epsilon", "0.1"],
    ["verify", *PAIR, "--center", "9,6", "--radius", "-1", "--epsilon", "0.1"],
    ["verify", *PAIR, "--center", "9,6", "--radius", "1", "--epsilon", "0.1", "--class", "3"],
    ["verify", "--model", PAIR[1], "--center", "9,6", "--radius", "1", "--epsilon", "0.1"],
    ["verify", "--model", "missing.json", "--scheme", PAIR[3], "--center", "9,6", "--radius", "1",
     "--epsilon", "0.1"],
    ["verify", *PAIR, "--center", "9,6", "--radius", "1", "--epsilon", "0.1", "--backend", "magic"],
    ["quantize", "--model", PAIR[1], "--scheme", "w=±,4,2;b=±,4,2;in=+,4,4;h=±,4,2", "--output", "x.json"],
])
def test_usage_errors_exit_3(capsys, argv):
    with pytest.raises(SystemExit) as e:
        raise SystemExit(main(argv))
    assert e.value.code == 3


def test_bad_scheme_file(capsys, tmp_path):
    bad = tmp_path / "s.json"
    bad.write_text(json.dumps({"w": ["±", 4, 2]}))
    code, _, err = run(capsys, "analyze", "--model", PAIR[1], "--scheme", str(bad), "--center", "9,6",
                       "--radius", "1")
    assert code == 3


def test_unvalidated_witness_is_error(capsys, tmp_path):
    # a solver that reports FEASIBLE without an assignment
    fake = tmp_path / "fake.py"
    fake.write_text(
        "import sys\n"
        "from quanterr.milp import parse_lp\n"
        "p = parse_lp(open(sys.argv[1]).read())\n"
        "open(sys.argv[2], 'w').write('FEASIBLE\\n')\n"
    )
    code, rep, _ = run(capsys, "verify", *PAIR, "--center", "9,6", "--radius", "1", "--epsilon", "0.05",
                       "--backend", "external", "--solver-cmd", f"{sys.executable} {fake} {{lp}} {{sol}}")
    assert code == 4 and rep.verdict == "Error"
