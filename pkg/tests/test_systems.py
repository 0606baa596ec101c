import itertools

import pytest
from hypothesis import given, settings, strategies as st

from abocs.oracles import random_system
from abocs.systems import (
    CompositionError,
    FiniteSystem,
    PredicateMaps,
    ValidationError,
    belief_update,
    closed_loop_prefixes,
    enab_set,
    enumerate_paths,
    generate_predicates,
    iblock_prefix,
    initial_beliefs,
    last_states,
)

A, B = 0, 1
Y0, Y1 = 0, 1
X0, X1 = 0, 1


class TestEnab:
    def test_intersection(self, s2):
        assert enab_set(s2, {X0, X1}) == {A}

    def test_single(self, s2):
        assert enab_set(s2, {X0}) == {A, B}

    def test_empty_is_everything(self, s2):
        assert enab_set(s2, set()) == {A, B}

    def test_unknown_state(self, s2):
        with pytest.raises(ValidationError):
            enab_set(s2, {7})


class TestBelief:
    def test_update(self, s2):
        assert belief_update(s2, {X0}, A, Y0) == {X0, X1}

    def test_empty_stays_empty(self, s2):
        assert belief_update(s2, set(), A, Y0) == frozenset()

    def test_inconsistent_output(self, s2):
        assert belief_update(s2, {X0}, B, Y1) == frozenset()

    def test_initial(self, s2):
        assert initial_beliefs(s2) == {Y0: {X0}}

    def test_initial_empty(self):
        s = FiniteSystem.from_tables(["x"], [], ["u"], ["y"], {}, {"x": ["y"]})
        assert initial_beliefs(s) == {}

    def test_initial_shared_output(self):
        s = FiniteSystem.from_tables(["x", "z"], ["x", "z"], ["u"], ["y"], {}, {"x": ["y"], "z": ["y"]})
        assert initial_beliefs(s) == {0: {0, 1}}


class TestIblock:
    def test_blocking(self, s2):
        assert iblock_prefix(s2, (Y0, A, Y0), B)

    def test_not_blocking(self, s2):
        assert not iblock_prefix(s2, (Y0,), B)

    def test_empty_belief(self, s2):
        # y1 is never emitted initially
        assert not iblock_prefix(s2, (Y1,), B)


class TestPaths:
    def test_depth_one(self, s2):
        assert enumerate_paths(s2, 1) == {(X0, A, X0), (X0, A, X1), (X0, B, X0)}

    def test_depth_zero(self, s2):
        assert enumerate_paths(s2, 0) == {(X0,)}

    def test_deadlocked(self):
        s = FiniteSystem.from_tables(["x"], ["x"], ["u"], ["y"], {}, {"x": ["y"]})
        assert enumerate_paths(s, 3) == {(0,)}

    def test_predicates(self, s2, s2_pm):
        empty, p = frozenset(), frozenset({"p"})
        assert generate_predicates(s2_pm, (X0, A, X1)) == {(empty, empty, p)}

    def test_predicate_count(self, s2):
        pm = PredicateMaps.from_tables(s2, [], ["p"], state_preds={"x0": [[], ["p"]]})
        assert len(generate_predicates(pm, (X0,))) == 2

    def test_deterministic_maps(self, s2, s2_pm):
        assert len(generate_predicates(s2_pm, (X0, B, X0, A, X1))) == 1


class TestClosedLoop:
    def test_always_b(self, s2):
        assert closed_loop_prefixes(s2, lambda nu: B, 2) == {(Y0, B, Y0, B, Y0)}

    def test_always_a(self, s2):
        assert closed_loop_prefixes(s2, lambda nu: A, 1) == {(Y0, A, Y0), (Y0, A, Y1)}

    def test_not_enabled(self, s2):
        ctrl = lambda nu: B if nu == (Y0, A, Y0) else A
        with pytest.raises(CompositionError) as e:
            closed_loop_prefixes(s2, ctrl, 2)
        assert e.value.reason == "not-enabled"

    def test_undefined(self, s2):
        with pytest.raises(CompositionError) as e:
            closed_loop_prefixes(s2, lambda nu: None, 1)
        assert e.value.reason == "undefined"


class TestValidation:
    def test_output_cover(self):
        with pytest.raises(ValidationError):
            FiniteSystem.from_tables(["x"], ["x"], ["u"], ["y"], {}, {})

    def test_unknown_name(self):
        with pytest.raises(ValidationError):
            FiniteSystem.from_tables(["x"], ["x"], ["u"], ["y"], {("x", "v"): ["x"]}, {"x": ["y"]})

    def test_predicate_letter_needed(self, s2):
        with pytest.raises(ValidationError):
            PredicateMaps.from_tables(s2, [], ["p"], state_preds={"x0": []})


# -- properties ------------------------------------------------------------------


def _prefixes(sys, depth):
    """All external prefixes of the system up to ``depth`` inputs."""
    layer = [(y,) for y in initial_beliefs(sys)]
    out = list(layer)
    for _ in range(depth):
        layer = [nu + (u, y) for nu in layer for u in range(sys.n_inputs) for y in range(sys.n_outputs)]
        out += layer
    return out


def _last_by_paths(sys, nu):
    k = len(nu) // 2
    res = set()
    for path in enumerate_paths(sys, k):
        if len(path) != 2 * k + 1:
            continue
        if all(path[2 * i + 1] == nu[2 * i + 1] for i in range(k)) and all(
            nu[2 * i] in sys.out[path[2 * i]] for i in range(k + 1)
        ):
            res.add(path[-1])
    return res


seeds = st.integers(min_value=0, max_value=10_000)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_belief_matches_path_enumeration(seed):
    import random

    sys = random_system(random.Random(seed), 1 + seed % 4, 1 + seed % 2, 1 + seed % 3)
    for nu in _prefixes(sys, 3):
        assert last_states(sys, nu) == _last_by_paths(sys, nu)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_enab_antitone(seed):
    import random

    rng = random.Random(seed)
    sys = random_system(rng, 4, 2, 2)
    for a in range(16):
        A_ = {x for x in range(4) if a >> x & 1}
        B_ = A_ | {rng.randrange(4)}
        assert enab_set(sys, B_) <= enab_set(sys, A_)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(min_value=0, max_value=3))
def test_closed_loop_prefix_closure(seed, k):
    import random

    sys = random_system(random.Random(seed), 3, 2, 2)
    enabled_everywhere = enab_set(sys, range(sys.n_states))
    if not enabled_everywhere:
        return
    u = min(enabled_everywhere)
    ctrl = lambda nu: u
    try:
        longer = closed_loop_prefixes(sys, ctrl, k + 1)
        shorter = closed_loop_prefixes(sys, ctrl, k)
    except CompositionError:
        return
    assert {nu[: 2 * k + 1] for nu in longer} <= shorter


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_iblock_unfolds(seed):
    import random

    sys = random_system(random.Random(seed), 3, 2, 2)
    for nu in _prefixes(sys, 2):
        for u in range(sys.n_inputs):
            if iblock_prefix(sys, nu, u):
                b = last_states(sys, nu)
                assert b and any(not sys.trans[x][u] for x in b)
