import os

import pytest

from abocs.problem import ProblemError, load_problem, loads_problem
from conftest import make_s2, make_s2_pm

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
PROBLEMS = os.path.join(ROOT, "problems")

LINE = """
[problem]
name = "line"

[dynamics]
model = "integrator"
n = 1

[inputs]
vectors = [[-1.0], [1.0]]
names = ["L", "R"]

[disturbance]
w = [0.1]

[initial]
lo = [0.2]
hi = [0.3]

[outputs]
mode = "tiles"
tiles = { size = [0.5] }

[grid]
lo = [0.0]
hi = [4.0]
eta = [0.5]
tau = 1.0

[[regions]]
name = "goal"
boxes = [{ lo = [1.5], hi = [3.0] }]

[spec]
ltl = "F goal"

[simulate]
steps = 12
seed = 2
"""


def test_s2_file():
    p = load_problem(os.path.join(PROBLEMS, "s2_safety.toml"))
    assert p.kind == "finite" and p.name == "s2_safety"
    s2 = make_s2()
    assert p.system == s2 and p.pm == make_s2_pm(s2)
    assert p.spec_ltl == "G !p" and p.synthesis.k_max == 4
    assert p.simulate.steps == 20


def test_line_problem():
    p = loads_problem(LINE)
    assert p.kind == "continuous"
    assert len(p.grid.tiles) == 8
    assert p.grid.tiles[0][1].lo == (0.0,) and p.grid.tiles[-1][1].hi == (4.0,)
    assert p.cs.input_names == ("L", "R")
    assert p.regions[0][0] == "goal"


def test_offset_tiles_cover():
    p = loads_problem(LINE.replace("tiles = { size = [0.5] }", "tiles = { offset = [-0.25], size = [0.5] }"))
    t = p.grid.tiles
    assert t[0][1].lo[0] <= 0.0 and t[-1][1].hi[0] >= 4.0
    assert t[0][1].lo[0] == -0.25


def test_shipped_problems_parse():
    for name in sorted(os.listdir(PROBLEMS)):
        if name.endswith(".toml"):
            load_problem(os.path.join(PROBLEMS, name))


@pytest.mark.parametrize(
    "old,new",
    [
        ('model = "integrator"', 'model = "rocket"'),
        ("eta = [0.5]", "eta = [0.3]"),
        ('name = "goal"', 'name = "violation"'),
        ("[simulate]", "[simulate]\nbogus = 1"),
        ('ltl = "F goal"', 'ltl = "F goal"\nhoa = "x.hoa"'),
        ("vectors = [[-1.0], [1.0]]", "vectors = [[-1.0], [1.0, 0.0]]"),
        ("[grid]", "[grid\n"),
    ],
)
def test_invalid(old, new):
    with pytest.raises(ProblemError):
        loads_problem(LINE.replace(old, new))
