import pytest
from hypothesis import given
from hypothesis import strategies as st

from quanterr.abstract import Box
from quanterr.report import Report

names = st.text("abcdefghijklmnopqrstuvwxyz_", min_size=1, max_size=10)
floats = st.floats(allow_nan=False, allow_infinity=False)


def test_roundtrip_example():
    r = Report("verify", "Falsified", "MILP", "found", (9, 6), {"target": 0, "epsilon": 0.05, "dra": "symbolic"},
               {"dra": 0.001})
    r.add_table("delta", [None, Box([-0.1, 0.0], [0.2, 0.3])], start=0)
    back = Report.parse(r.to_text())
    assert back == r
    assert back.tables["delta"] == [(1, 0, -0.1, 0.2), (1, 1, 0.0, 0.3)]


@given(st.dictionaries(names, st.one_of(st.integers(), floats)), st.lists(st.tuples(
    st.integers(0, 9), st.integers(0, 9), floats, floats), max_size=6),
    st.sampled_from(["Proved", "Falsified", "Unknown", "Error", ""]))
def test_roundtrip_property(values, rows, verdict):
    r = Report("oracle", verdict, values=values, tables={"t": rows})
    assert Report.parse(r.to_text()) == r


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        Report("x", "Maybe")
    with pytest.raises(ValueError):
        Report.parse("command = x\ntable t\n 0 0 1.0 2.0\n")
    with pytest.raises(ValueError):
        Report.parse("mystery = 1\n")
    with pytest.raises(ValueError):
        Report("x", detail="two\nlines").to_text()
