import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from abocs import verify
from abocs.abstraction import Box, ControlSystem, GridSpec, build_abstraction, integrator_chain
from abocs.efrr import EfrrRelation
from abocs.ltl import ltl_to_uca, parse_ltl
from abocs.runtime import (
    RefinedController,
    UndefinedStrategy,
    project_omega,
    refined_step,
    simulate_closed_loop,
    simulate_continuous,
    trace_csv,
    trace_svg,
)
from abocs.synthesis import MealyController, synthesize
from abocs.systems import CompositionError, ValidationError, belief_update, initial_beliefs
from conftest import spec

Y0, Y1, A, B = 0, 1, 0, 1


def always_b(s2, s2_pm):
    return synthesize(s2, s2_pm, spec("G !p"))


class TestProjection:
    def test_identity(self, s2):
        sigma = (Y0, A, Y1, A, Y1)
        assert project_omega(sigma, EfrrRelation.identity(s2)) == sigma

    def test_lowest_policy(self):
        q = EfrrRelation((frozenset([0]),), (frozenset([0]),), (frozenset([1, 2]),))
        assert project_omega((0, 0, 0), q) == (1, 0, 1)

    def test_bad_prefix(self, s2):
        with pytest.raises(ValidationError):
            project_omega((Y0, A), EfrrRelation.identity(s2))


class TestRefinedStep:
    def test_constant(self, s2, s2_pm):
        rc = RefinedController(always_b(s2, s2_pm), EfrrRelation.identity(s2))
        assert [refined_step(rc, Y0) for _ in range(4)] == [B] * 4
        assert rc.abstract_prefix == [Y0, B] * 4

    def test_uncovered_output(self, s2, s2_pm):
        q = EfrrRelation.identity(s2)
        q = EfrrRelation(q.alpha, q.beta, (frozenset(), q.gamma[1]))
        with pytest.raises(ValidationError):
            refined_step(RefinedController(always_b(s2, s2_pm), q), Y0)

    def test_undefined(self, s2, s2_pm):
        rc = RefinedController(always_b(s2, s2_pm), EfrrRelation.identity(s2))
        with pytest.raises(UndefinedStrategy):
            refined_step(rc, Y1)


class TestFinite:
    def test_exhaustive_always_b(self, s2, s2_pm):
        traces = simulate_closed_loop(s2, always_b(s2, s2_pm), 5, branch_mode="all", pm=s2_pm)
        assert len(traces) == 1
        (t,) = traces
        assert t.outputs == (Y0,) * 6 and t.inputs == (B,) * 5
        assert all(l == frozenset() for l in t.letters)

    def test_deadlocking_controller(self, s2, s2_pm):
        m = MealyController((((A, 1), None), ((B, 1), None)))
        with pytest.raises(CompositionError) as e:
            simulate_closed_loop(s2, m, 3, branch_mode="all", pm=s2_pm)
        assert e.value.reason == "not-enabled"

    def test_random_is_seeded(self, s2, s2_pm):
        m = synthesize(s2, s2_pm, spec("true"))
        a = simulate_closed_loop(s2, m, 30, seed=4, pm=s2_pm)
        b = simulate_closed_loop(s2, m, 30, seed=4, pm=s2_pm)
        assert a == b


def line_problem(mode="tiles", eps=0.0):
    cs = ControlSystem(
        1, integrator_chain(1)[0], ((-1.0,), (1.0,)), (0.1,), ((0.0,),), ("L", "R"),
        Box((0.2,), (0.3,)), mode, eps,
    )
    # one step moves two cells, so no cell can spuriously reach itself
    tiles = tuple((f"t{i}", Box((i * 0.5,), ((i + 1) * 0.5,))) for i in range(8)) if mode == "tiles" else ()
    grid = GridSpec((0.0,), (4.0,), (0.5,), 1.0, 10, tiles)
    ga = build_abstraction(cs, grid, [("goal", [Box((1.5,), (3.0,))])])
    ap = ga.pm.ap_output
    phi = ltl_to_uca(parse_ltl("F goal & G !violation", (), ap), (), ap)
    return ga, phi


def _replay_membership(ga, m, tr):
    """Every concrete input is beta of the abstract move on the projected prefix."""
    z = m.initial
    for y, u in zip(tr.outputs, tr.input_ids):
        yh = min(ga.gamma(tuple(y)))
        uh, z = m.step[z][yh]
        assert u in ga.relation.b(uh)


class TestContinuous:
    def test_reach_membership(self):
        ga, phi = line_problem()
        m = synthesize(ga.system, ga.pm, phi)
        assert m
        for seed in range(5):
            tr = simulate_continuous(ga, RefinedController(m, ga.relation), 12, seed)
            _replay_membership(ga, m, tr)
            assert any("goal" in l for l in tr.letters)
            assert not any("violation" in l for l in tr.letters)

    def test_noisy_projection_stays_consistent(self):
        ga, phi = line_problem("noisy", eps=0.2)
        m = synthesize(ga.system, ga.pm, phi)
        assert m
        sys = ga.system
        for seed in range(5):
            rc = RefinedController(m, ga.relation)
            simulate_continuous(ga, rc, 12, seed)
            yh = rc.abstract_prefix
            b = initial_beliefs(sys).get(yh[0], frozenset())
            assert b
            for i in range(1, len(yh) - 1, 2):
                b = belief_update(sys, b, yh[i], yh[i + 1])
                assert b, "projected prefix left the abstract closed loop"

    def test_exports(self):
        ga, phi = line_problem()
        m = synthesize(ga.system, ga.pm, phi)
        tr = simulate_continuous(ga, RefinedController(m, ga.relation), 5, 0)
        csv = trace_csv(tr, ga.cs.input_names)
        assert csv.splitlines()[0].startswith("t,")
        assert len(csv.splitlines()) == 7
        assert trace_svg(ga, [tr]).startswith("<svg")

    def test_steps_validated(self):
        ga, phi = line_problem()
        m = synthesize(ga.system, ga.pm, phi)
        with pytest.raises(ValueError):
            simulate_continuous(ga, RefinedController(m, ga.relation), 0)


@settings(max_examples=15, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_refinement_clauses(seed):
    rec = verify.lemma1_case(seed, depth=6)
    assert rec["ok"], rec
    if not rec.get("skip"):
        assert rec["mutation_fails_b"]
