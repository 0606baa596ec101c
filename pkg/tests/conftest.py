import pytest

from abocs.ltl import ltl_to_uca, parse_ltl
from abocs.systems import FiniteSystem, PredicateMaps


def make_s2() -> FiniteSystem:
    """x0 -a-> {x0, x1}, x0 -b-> x0, x1 -a-> x1; x1 may emit y1."""
    return FiniteSystem.from_tables(
        ["x0", "x1"],
        ["x0"],
        ["a", "b"],
        ["y0", "y1"],
        {("x0", "a"): ["x0", "x1"], ("x0", "b"): ["x0"], ("x1", "a"): ["x1"]},
        {"x0": ["y0"], "x1": ["y0", "y1"]},
    )


def make_s2_pm(sys) -> PredicateMaps:
    return PredicateMaps.from_tables(sys, [], ["p"], state_preds={"x0": [[]], "x1": [["p"]]})


def spec(text, ap_input=(), ap_output=("p",)):
    return ltl_to_uca(parse_ltl(text, ap_input, ap_output), ap_input, ap_output)


@pytest.fixture
def s2():
    return make_s2()


@pytest.fixture
def s2_pm(s2):
    return make_s2_pm(s2)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
