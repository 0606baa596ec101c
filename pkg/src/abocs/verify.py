"""Seeded oracle cases, one record per instance.

Each ``*_case(seed)`` returns a dict with at least ``suite``, ``seed`` and
``ok``; ``skip`` marks seeds that do not yield an instance of the required
kind (for example a pair that fails the eFRR check).  The ``verify`` CLI
streams these records as JSON lines and the acceptance tests count them.
"""
from __future__ import annotations

import random
from typing import Iterator

from . import oracles as orc
from .automata import uca_accepts_lasso
from .efrr import EfrrRelation, check_sound_abstraction
from .ltl import ltl_to_uca, parse_ltl
from .product import build_product
from .runtime import RefinedController
from .synthesis import induced_strategy, synthesize
from .systems import CompositionError, closed_loop_prefixes

COMPLETENESS_FAMILY = ("G !p", "F p", "G F p", "G (r -> X !p)")


def efrr_case(seed: int) -> dict:
    S, Sh, q = orc.thickened_pair(seed)
    got = {v.key() for v in check_sound_abstraction(S, Sh, q).violations}
    ref = orc.reference_efrr(S, Sh, q)
    return {"suite": "efrr", "seed": seed, "ok": got == ref, "violations": len(ref)}


def prop3_case(seed: int, word_bound: int = 3) -> dict:
    v = orc.oracle_prop3(orc.random_instance(seed), word_bound)
    rec = {"suite": "prop3", "seed": seed, "ok": v.passed, "words": v.checked}
    if v.counterexample:
        rec["counterexample"] = {k: repr(x) for k, x in v.counterexample.items()}
    return rec


def prop3_mutation_case(seed: int, kind: str, word_bound: int = 3) -> dict:
    """``ok`` here means the mutation was caught (a counterexample exists)."""
    inst = orc.random_instance(seed)
    p = orc.mutate_product(build_product(inst.sys, inst.pm, inst.spec), kind)
    v = orc.oracle_prop3(inst, word_bound, product=p)
    return {"suite": f"prop3-{kind}", "seed": seed, "ok": not v.passed}


def soundness_case(seed: int, depth: int = 12) -> dict:
    inst = orc.random_instance(seed)
    r = synthesize(inst.sys, inst.pm, inst.spec)
    rec = {"suite": "soundness", "seed": seed, "spec": inst.spec_text, "realizable": bool(r)}
    if not r:
        return {**rec, "ok": True}
    mc = orc.model_check(inst.sys, inst.pm, inst.spec, r)
    try:
        closed_loop_prefixes(inst.sys, induced_strategy(r), depth)
        comp = None
    except CompositionError as e:
        comp = e.reason
    rec.update(ok=mc.ok and comp is None, k=r.k, memory=r.n_memory)
    if not mc.ok:
        rec["model_check"] = mc.reason
    if comp:
        rec["composition"] = comp
    return rec


def completeness_case(seed: int, mealy_cap: int = 3) -> dict:
    inst = orc.random_instance(seed, max_states=3, family=COMPLETENESS_FAMILY)
    v = orc.oracle_thm4_completeness(inst, mealy_cap)
    return {
        "suite": "completeness", "seed": seed, "spec": inst.spec_text, "ok": v.agree,
        "synthesized": v.synthesized, "brute_force": v.brute_force,
    }


def _lemma1_pair(seed: int):
    inst = orc.random_instance(seed, max_states=4)
    rng = random.Random(seed)
    xs = list(range(inst.sys.n_states))
    rng.shuffle(xs)
    nb = rng.randint(1, len(xs))
    blocks = [set() for _ in range(nb)]
    for i, x in enumerate(xs):
        blocks[i % nb].add(x)
    Sh, pmh, q = orc.quotient_pair(inst.sys, inst.pm, blocks)
    if not check_sound_abstraction(inst.sys, Sh, q).passed:
        return None
    for text in (inst.spec_text, "true"):
        spec = ltl_to_uca(parse_ltl(text, orc.AP_INPUT, orc.AP_OUTPUT), orc.AP_INPUT, orc.AP_OUTPUT)
        C = synthesize(Sh, pmh, spec)
        if C:
            return inst, Sh, q, spec, text, C
    return None


def lemma1_case(seed: int, depth: int = 8) -> dict:
    """Refinement clauses (a)-(d), the refined-controller model check and the gamma mutation."""
    pair = _lemma1_pair(seed)
    if pair is None:
        return {"suite": "lemma1", "seed": seed, "ok": True, "skip": True}
    inst, Sh, q, spec, text, C = pair
    v = orc.oracle_lemma1(inst.sys, Sh, q, RefinedController(C, q), depth)
    refined = orc.model_check(inst.sys, inst.pm, spec, orc.refined_mealy(C, q, inst.sys.n_outputs))
    # send the initial output to an abstract output no state emits
    y0 = min(y for x in inst.sys.initial for y in inst.sys.out[x])
    g = list(q.gamma)
    g[y0] = frozenset([Sh.n_outputs - 1])
    qm = EfrrRelation(q.alpha, q.beta, tuple(g))
    vm = orc.oracle_lemma1(inst.sys, Sh, qm, RefinedController(C, qm), depth)
    return {
        "suite": "lemma1", "seed": seed, "spec": text, "ok": v.passed and refined.ok,
        "clauses": v.clauses, "refined_model_check": refined.ok, "mutation_fails_b": not vm.clauses["b"],
    }


_LTL_CACHE: dict = {}


def ltl_case(index: int, seed: int = 0, count: int = 500) -> dict:
    text, pre, per = orc.corpus_pairs(count, seed)[index % count]
    if text not in _LTL_CACHE:
        f = parse_ltl(text, orc.AP_INPUT, orc.AP_OUTPUT)
        _LTL_CACHE[text] = (f, ltl_to_uca(f, orc.AP_INPUT, orc.AP_OUTPUT))
    f, a = _LTL_CACHE[text]
    inp = frozenset(orc.AP_INPUT)
    conv = lambda w: [(l & inp, l - inp) for l in w]
    got = uca_accepts_lasso(a, conv(pre), conv(per))
    want = orc.eval_ltl_lasso(f, pre, per)
    return {"suite": "ltl", "seed": index, "formula": text, "ok": got == want, "holds": want}


SUITES = {
    "efrr": efrr_case,
    "prop3": prop3_case,
    "soundness": soundness_case,
    "completeness": completeness_case,
    "lemma1": lemma1_case,
    "ltl": ltl_case,
}


def run_suite(name: str, seed: int = 0, count: int = 10) -> Iterator[dict]:
    fn = SUITES[name]
    for s in range(seed, seed + count):
        yield fn(s)
