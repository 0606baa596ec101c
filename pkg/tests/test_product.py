import random

from hypothesis import given, settings, strategies as st

from abocs import oracles as orc
from abocs.automata import uca_accepts_lasso
from abocs.ltl import ltl_to_uca, parse_ltl
from abocs.product import build_product, iblock_semantics_check
from abocs.systems import FiniteSystem, PredicateMaps
from conftest import spec

Y0, Y1, A, B = 0, 1, 0, 1


def test_s2_product_shape(s2, s2_pm):
    g = spec("G !p")
    p = build_product(s2, s2_pm, g)
    assert p.uca.n_states <= s2.n_states * g.n_states + 1
    assert p.bottom is not None
    # x1 is reached under a, then b is disabled there
    x1_states = [i for i, pr in enumerate(p.pairs) if pr and pr[0] == 1]
    assert any(p.bottom in p.uca.delta[i][p.letter(Y0, B)] for i in x1_states)


def test_total_system_true_spec():
    s = FiniteSystem.from_tables(
        ["x0", "x1"], ["x0"], ["a"], ["y"], {("x0", "a"): ["x1"], ("x1", "a"): ["x0"]}, {"x0": ["y"], "x1": ["y"]}
    )
    pm = PredicateMaps.from_tables(s, [], ["p"])
    p = build_product(s, pm, spec("true"))
    assert p.bottom is None
    assert p.uca.rejecting == frozenset()
    assert uca_accepts_lasso(p.uca, [], [(0, 0)])


def test_blocked_word_rejected(s2, s2_pm):
    p = build_product(s2, s2_pm, spec("true"))
    assert not uca_accepts_lasso(p.uca, [(Y0, A)], [(Y1, B)])
    assert uca_accepts_lasso(p.uca, [(Y0, A)], [(Y1, A)])


class TestSemanticsCheck:
    def test_safe_loop(self, s2, s2_pm):
        r = iblock_semantics_check(s2, s2_pm, spec("G !p"), [], [(Y0, B)])
        assert r == {"in_lang": True, "in_epaths": True, "in_iblock": False, "spec_holds": True}

    def test_blocking(self, s2, s2_pm):
        r = iblock_semantics_check(s2, s2_pm, spec("G !p"), [(Y0, A)], [(Y0, B)])
        assert r["in_iblock"] and not r["in_lang"]

    def test_impossible_output(self, s2, s2_pm):
        r = iblock_semantics_check(s2, s2_pm, spec("G !p"), [], [(Y1, A)])
        assert not r["in_epaths"] and not r["in_iblock"] and r["in_lang"]


def test_strict_reading_differs_only_in_letters(s2, s2_pm):
    p = build_product(s2, s2_pm, spec("G !p"), strict=True)
    assert p.uca.rejecting


seeds = st.integers(min_value=0, max_value=10**6)


def _letters_of(p):
    return [(y, u) for y in range(p.n_outputs) for u in range(p.n_inputs)]


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_product_invariants(seed):
    inst = orc.random_instance(seed)
    sys, a = inst.sys, inst.spec
    p = build_product(sys, inst.pm, a)
    expected = {i for i, pr in enumerate(p.pairs) if pr is not None and pr[1] in a.rejecting}
    if p.bottom is not None:
        expected.add(p.bottom)
        assert all(row == {p.bottom} for row in p.uca.delta[p.bottom])
    assert p.uca.rejecting == expected
    for i, pr in enumerate(p.pairs):
        if pr is None:
            continue
        x, _ = pr
        for l, (y, u) in enumerate(p.uca.alphabet):
            for j in p.uca.delta[i][l]:
                assert y in sys.out[x]
                if j != p.bottom:
                    assert p.pairs[j][0] in sys.trans[x][u]


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_pruning_preserves_language(seed):
    inst = orc.random_instance(seed)
    full = build_product(inst.sys, inst.pm, inst.spec, prune=False)
    small = build_product(inst.sys, inst.pm, inst.spec)
    rng = random.Random(seed)
    letters = _letters_of(small)
    for _ in range(50):
        pre = [rng.choice(letters) for _ in range(rng.randint(0, 3))]
        per = [rng.choice(letters) for _ in range(rng.randint(1, 3))]
        assert uca_accepts_lasso(full.uca, pre, per) == uca_accepts_lasso(small.uca, pre, per)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_language_characterisation(seed):
    v = orc.oracle_prop3(orc.random_instance(seed), 2)
    assert v.passed, v.counterexample
