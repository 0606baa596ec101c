from dataclasses import replace

from hypothesis import given, settings, strategies as st

from abocs import oracles as orc
from abocs.efrr import A1, A2II, A3, EfrrRelation, check_sound_abstraction, check_sound_realization
from abocs.systems import FiniteSystem
from conftest import make_s2

X0, X1, A, B = 0, 1, 0, 1


def drop_edge(sys, x, u, x2):
    trans = [list(row) for row in sys.trans]
    trans[x][u] = trans[x][u] - {x2}
    return replace(sys, trans=tuple(tuple(r) for r in trans))


def test_identity_passes(s2):
    assert check_sound_abstraction(s2, s2, EfrrRelation.identity(s2)).passed


def test_missing_edge_witness(s2):
    sh = drop_edge(s2, X0, A, X1)
    rep = check_sound_abstraction(s2, sh, EfrrRelation.identity(s2))
    assert [v.key() for v in rep.violations] == [(A2II, X0, X0, A)]
    assert "A2.ii x=0 xh=0 uh=0" in rep.to_text()


def test_gamma_outside_outputs(s2):
    sh = FiniteSystem(
        s2.state_names, s2.input_names, s2.output_names + ("y2",), s2.initial, s2.trans, s2.out
    )
    q = EfrrRelation.identity(s2)
    q = replace(q, gamma=(frozenset([2]), q.gamma[1]))
    rep = check_sound_abstraction(s2, sh, q)
    assert rep.clauses()[A3] is False
    assert all(v.clause == A3 for v in rep.violations)


class TestRealization:
    def test_identity(self, s2):
        assert check_sound_realization(s2, s2, EfrrRelation.identity(s2)).passed

    def test_strict_abstraction(self, s2):
        # S2 with x1 removed from F(x0, a) is abstracted by S2 but does not realize it
        small = drop_edge(s2, X0, A, X1)
        r = check_sound_realization(small, s2, EfrrRelation.identity(s2))
        assert r.forward.passed and not r.inverse.passed

    def test_empty_alpha(self, s2):
        q = EfrrRelation.identity(s2)
        q = replace(q, alpha=(frozenset(), q.alpha[1]))
        r = check_sound_realization(s2, s2, q)
        assert not r.forward.passed and not r.inverse.passed
        assert r.forward.violations[0].clause == A1


seeds = st.integers(min_value=0, max_value=10**6)


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_agrees_with_reference(seed):
    S, Sh, q = orc.thickened_pair(seed)
    got = {v.key() for v in check_sound_abstraction(S, Sh, q).violations}
    assert got == orc.reference_efrr(S, Sh, q)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_restriction_closure(seed):
    from abocs.graphs import reachable

    S, Sh, q = orc.thickened_pair(seed)
    if not check_sound_abstraction(S, Sh, q).passed:
        return
    reach = reachable(sorted(S.initial), lambda x: sorted(set().union(*S.trans[x])))
    alpha = tuple(q.alpha[x] if x in reach else frozenset() for x in range(S.n_states))
    assert check_sound_abstraction(S, Sh, replace(q, alpha=alpha)).passed
