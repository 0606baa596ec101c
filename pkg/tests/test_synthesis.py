import pytest
from hypothesis import given, settings, strategies as st

from abocs import oracles as orc
from abocs.product import build_product
from abocs.synthesis import (
    DEAD,
    UNSAFE,
    MealyController,
    SafetyGame,
    Unrealizable,
    induced_strategy,
    kcounter_game,
    solve_safety,
    synthesize,
)
from abocs.systems import FiniteSystem, PredicateMaps, belief_update, closed_loop_prefixes, enab_set
from conftest import spec

Y0, Y1, A, B = 0, 1, 0, 1


def reachable_beliefs_ok(sys, m):
    """Every (memory, belief) pair reachable in the closed loop has an enabled move."""
    from abocs.systems import initial_beliefs

    seen = set()
    frontier = [(m.initial, y, frozenset(b)) for y, b in initial_beliefs(sys).items()]
    while frontier:
        node = frontier.pop()
        if node in seen:
            continue
        seen.add(node)
        z, y, b = node
        mv = m.step[z][y]
        if mv is None or mv[0] not in enab_set(sys, b):
            return False
        u, z2 = mv
        for y2 in range(sys.n_outputs):
            b2 = belief_update(sys, b, u, y2)
            if b2:
                frontier.append((z2, y2, b2))
    return True


class TestGame:
    def test_empty_rejecting(self):
        s = FiniteSystem.from_tables(
            ["x0", "x1"], ["x0"], ["a"], ["y0", "y1"],
            {("x0", "a"): ["x0", "x1"], ("x1", "a"): ["x0"]}, {"x0": ["y0"], "x1": ["y0", "y1"]},
        )
        p = build_product(s, PredicateMaps.from_tables(s, [], ["p"]), spec("true"))
        assert not p.uca.rejecting
        g = kcounter_game(p, 0)
        assert all(UNSAFE not in mv for row in g.moves for mv in row if mv is not DEAD)
        assert solve_safety(g).winning

    def test_s2_safety_k0(self, s2, s2_pm):
        g = kcounter_game(build_product(s2, s2_pm, spec("G !p")), 0)
        sol = solve_safety(g)
        assert sol.winning
        assert sol.permissive[(g.initial, Y0)] == {B}

    def test_all_inputs_block(self):
        s = FiniteSystem.from_tables(["x"], ["x"], ["a", "b"], ["y"], {}, {"x": ["y"]})
        pm = PredicateMaps.from_tables(s, [], ["p"])
        p = build_product(s, pm, spec("true"))
        for k in range(6):
            assert not solve_safety(kcounter_game(p, k)).winning

    def test_trivial_games(self):
        free = SafetyGame(0, (None,), (((0, 0),),), 1, 2)
        sol = solve_safety(free)
        assert sol.winning and sol.permissive[(0, 0)] == {0, 1}
        doomed = SafetyGame(0, (None,), (((UNSAFE, UNSAFE),),), 1, 2)
        assert not solve_safety(doomed).winning


class TestSynthesize:
    def test_s2_safety(self, s2, s2_pm):
        m = synthesize(s2, s2_pm, spec("G !p"))
        assert isinstance(m, MealyController)
        assert m.k == 0 and m.n_memory == 1
        assert m.step[0][Y0] == (B, 0)
        assert orc.model_check(s2, s2_pm, spec("G !p"), m).ok

    def test_s2_false(self, s2, s2_pm):
        r = synthesize(s2, s2_pm, spec("false"), k_max=6)
        assert isinstance(r, Unrealizable) and r.k_max == 6 and not r

    def test_s2_true_deadlock_free(self, s2, s2_pm):
        m = synthesize(s2, s2_pm, spec("true"))
        assert m
        assert reachable_beliefs_ok(s2, m)
        assert closed_loop_prefixes(s2, induced_strategy(m), 8)

    def test_schedules_agree(self, s2, s2_pm):
        a = synthesize(s2, s2_pm, spec("G F !p"), schedule="linear")
        b = synthesize(s2, s2_pm, spec("G F !p"), schedule="gallop")
        assert a == b

    def test_bad_schedule(self, s2, s2_pm):
        with pytest.raises(ValueError):
            synthesize(s2, s2_pm, spec("G !p"), schedule="random")


class TestInduced:
    def test_constant(self, s2, s2_pm):
        c = induced_strategy(synthesize(s2, s2_pm, spec("G !p")))
        assert c((Y0,)) == B
        assert c((Y0, B, Y0)) == B

    def test_contradicting_history(self, s2, s2_pm):
        c = induced_strategy(synthesize(s2, s2_pm, spec("G !p")))
        assert c((Y0, A, Y0)) is None

    def test_replay_deterministic(self, s2, s2_pm):
        c = induced_strategy(synthesize(s2, s2_pm, spec("true")))
        nu = (Y0, A, Y1)
        assert c(nu) == c(nu)


seeds = st.integers(min_value=0, max_value=10**6)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_sound_controllers(seed):
    inst = orc.random_instance(seed)
    m = synthesize(inst.sys, inst.pm, inst.spec)
    if not m:
        return
    assert orc.model_check(inst.sys, inst.pm, inst.spec, m).ok
    closed_loop_prefixes(inst.sys, induced_strategy(m), 6)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_optimisations_preserve_answer(seed):
    inst = orc.random_instance(seed)
    p = build_product(inst.sys, inst.pm, inst.spec)
    for k in (0, 1, 2):
        plain = solve_safety(kcounter_game(p, k, merge_outputs=False)).winning
        assert solve_safety(kcounter_game(p, k)).winning == plain
        # merging into a larger position is sound: it never wins spuriously
        if solve_safety(kcounter_game(p, k, antichain=True)).winning:
            assert plain
        # the decorrelated abstraction may lose, never win spuriously
        if solve_safety(kcounter_game(p, k, grouping="spec")).winning:
            assert plain


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_antichain_synthesis_equivalent(seed):
    inst = orc.random_instance(seed)
    plain = synthesize(inst.sys, inst.pm, inst.spec)
    fast = synthesize(inst.sys, inst.pm, inst.spec, antichain=True)
    assert bool(plain) == bool(fast)
    if plain:
        assert plain.k == fast.k


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_counter_monotonicity(seed):
    inst = orc.random_instance(seed)
    g = kcounter_game(build_product(inst.sys, inst.pm, inst.spec), 1)
    sol = solve_safety(g)
    for e1, c1 in enumerate(g.env):
        for e2, c2 in enumerate(g.env):
            if c1.leq(c2) and e2 not in sol.losing_env:
                assert e1 not in sol.losing_env


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_spec_grouping_controllers_sound(seed):
    inst = orc.random_instance(seed)
    m = synthesize(inst.sys, inst.pm, inst.spec, grouping="spec")
    if m:
        assert orc.model_check(inst.sys, inst.pm, inst.spec, m).ok
