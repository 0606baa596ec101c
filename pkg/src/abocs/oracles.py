"""Brute-force reference checks for small instances.

Nothing here reuses the successor, belief or acceptance code of the main
modules; only the data types are shared.  Every oracle is exponential, so
inputs are bounded by ``SIZE_CAPS``.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from itertools import product as cartesian
from typing import Optional

from .automata import Uca
from .efrr import EfrrRelation
from .ltl import (
    Always, And, Eventually, FalseF, Formula, Iff, Implies, Next, Not, Or, Prop, Release, TrueF, Until,
    ltl_to_uca, parse_ltl,
)
from .systems import FiniteSystem, PredicateMaps

SIZE_CAPS = {
    "states": 5,  # plant states of a random instance
    "prefix": 3,  # lasso prefix length
    "period": 3,  # lasso period length
    "mealy": 3,  # memory states in the brute-force controller search
}

AP_INPUT = ("r",)
AP_OUTPUT = ("p", "q")

SPEC_FAMILY = (
    "G !p",
    "F p",
    "G F p",
    "p U q",
    "G (p -> F q)",
    "F G !q",
    "G (r -> X !p)",
    "true",
)


def _check_caps(**sizes):
    for k, v in sizes.items():
        if v > SIZE_CAPS[k]:
            raise ValueError(f"{k}={v} exceeds the oracle cap {SIZE_CAPS[k]}")


# ---------------------------------------------------------------- instances


@dataclass(frozen=True)
class RandomInstance:
    seed: int
    sys: FiniteSystem
    pm: PredicateMaps
    spec_text: str
    spec: Uca = field(repr=False)


def _letters(rng, aps, max_letters=2):
    pool = [frozenset(c) for r in range(len(aps) + 1) for c in _combos(aps, r)]
    n = 1 if rng.random() < 0.75 else max_letters
    return frozenset(rng.sample(pool, min(n, len(pool))))


def _combos(aps, r):
    if r == 0:
        return [()]
    return [(a,) + rest for i, a in enumerate(aps) for rest in _combos(aps[i + 1:], r - 1)]


def random_system(rng, n_states, n_inputs, n_outputs, p_empty=0.2) -> FiniteSystem:
    trans = []
    for _ in range(n_states):
        row = []
        for _ in range(n_inputs):
            if rng.random() < p_empty:
                row.append(frozenset())
            else:
                succ = {x for x in range(n_states) if rng.random() < 0.4}
                row.append(frozenset(succ or {rng.randrange(n_states)}))
        trans.append(tuple(row))
    out = []
    for _ in range(n_states):
        ys = {y for y in range(n_outputs) if rng.random() < 0.3}
        out.append(frozenset(ys or {rng.randrange(n_outputs)}))
    initial = frozenset(rng.sample(range(n_states), 1 if n_states == 1 or rng.random() < 0.7 else 2))
    return FiniteSystem(
        tuple(f"x{i}" for i in range(n_states)),
        tuple("abcd"[i] for i in range(n_inputs)),
        tuple(f"y{i}" for i in range(n_outputs)),
        initial,
        tuple(trans),
        tuple(out),
    )


def random_instance(
    seed: int, max_states: int = 4, max_inputs: int = 2, max_outputs: int = 2, family=SPEC_FAMILY
) -> RandomInstance:
    """Seeded random plant, predicate maps and spec; reproducible from (seed, sizes)."""
    _check_caps(states=max_states)
    rng = random.Random(f"abocs-{seed}-{max_states}-{max_inputs}-{max_outputs}")
    sys = random_system(rng, rng.randint(1, max_states), rng.randint(1, max_inputs), rng.randint(1, max_outputs))
    pm = PredicateMaps(
        AP_INPUT,
        AP_OUTPUT,
        tuple(_letters(rng, AP_INPUT) for _ in range(sys.n_inputs)),
        tuple(_letters(rng, AP_OUTPUT) for _ in range(sys.n_states)),
    )
    text = rng.choice(family)
    spec = ltl_to_uca(parse_ltl(text, AP_INPUT, AP_OUTPUT), AP_INPUT, AP_OUTPUT)
    return RandomInstance(seed, sys, pm, text, spec)


# ---------------------------------------------------------------- graph helpers


def _explore(roots, succ):
    """Reachable nodes and adjacency lists."""
    adj = {}
    stack = list(roots)
    for r in roots:
        adj.setdefault(r, None)
    while stack:
        v = stack.pop()
        if adj.get(v) is not None:
            continue
        ws = list(succ(v))
        adj[v] = ws
        for w in ws:
            if w not in adj:
                adj[w] = None
                stack.append(w)
    return adj


def _bad_cycle(adj, bad) -> bool:
    """Buchi emptiness by the nested fixpoint: keep bad nodes that reach a kept node in >= 1 step."""
    preds = {v: [] for v in adj}
    for v, ws in adj.items():
        for w in ws:
            preds[w].append(v)
    Z = {v for v in adj if bad(v)}
    while Z:
        back = set()
        stack = list(Z)
        while stack:
            w = stack.pop()
            for v in preds[w]:
                if v not in back:
                    back.add(v)
                    stack.append(v)
        Z2 = Z & back
        if Z2 == Z:
            return True
        Z = Z2
    return False


def _any_cycle(adj) -> bool:
    return _bad_cycle(adj, lambda v: True)


# ---------------------------------------------------------------- LTL on lassos


def eval_ltl_lasso(f: Formula, prefix, period) -> bool:
    """Truth of ``f`` at position 0 of ``prefix period^omega``; letters are sets of true atoms."""
    word = [frozenset(l) for l in prefix] + [frozenset(l) for l in period]
    if len(word) == len(prefix):
        raise ValueError("period must be non-empty")
    n, loop = len(word), len(prefix)
    nxt = [i + 1 if i + 1 < n else loop for i in range(n)]
    memo = {}

    def until(a, b):
        v = [False] * n
        changed = True
        while changed:
            changed = False
            for i in range(n - 1, -1, -1):
                new = b[i] or (a[i] and v[nxt[i]])
                if new != v[i]:
                    v[i], changed = new, True
        return v

    def release(a, b):
        v = [True] * n
        changed = True
        while changed:
            changed = False
            for i in range(n - 1, -1, -1):
                new = b[i] and (a[i] or v[nxt[i]])
                if new != v[i]:
                    v[i], changed = new, True
        return v

    def ev(g):
        if g in memo:
            return memo[g]
        if isinstance(g, TrueF):
            r = [True] * n
        elif isinstance(g, FalseF):
            r = [False] * n
        elif isinstance(g, Prop):
            r = [g.name in word[i] for i in range(n)]
        elif isinstance(g, Not):
            r = [not v for v in ev(g.arg)]
        elif isinstance(g, And):
            r = [a and b for a, b in zip(ev(g.left), ev(g.right))]
        elif isinstance(g, Or):
            r = [a or b for a, b in zip(ev(g.left), ev(g.right))]
        elif isinstance(g, Implies):
            r = [not a or b for a, b in zip(ev(g.left), ev(g.right))]
        elif isinstance(g, Iff):
            r = [a == b for a, b in zip(ev(g.left), ev(g.right))]
        elif isinstance(g, Next):
            a = ev(g.arg)
            r = [a[nxt[i]] for i in range(n)]
        elif isinstance(g, Until):
            r = until(ev(g.left), ev(g.right))
        elif isinstance(g, Release):
            r = release(ev(g.left), ev(g.right))
        elif isinstance(g, Eventually):
            r = until([True] * n, ev(g.arg))
        elif isinstance(g, Always):
            r = release([False] * n, ev(g.arg))
        else:
            raise TypeError(f"unknown formula node {g!r}")
        memo[g] = r
        return r

    return ev(f)[0]


def lasso_accepts(a: Uca, prefix, period) -> bool:
    """Reference universal co-Buchi acceptance over letter ids."""
    word = list(prefix) + list(period)
    n, loop = len(word), len(prefix)
    roots = [(q, 0) for q in a.initial]

    def succ(v):
        q, i = v
        j = i + 1 if i + 1 < n else loop
        return [(q2, j) for q2 in a.delta[q][word[i]]]

    return not _bad_cycle(_explore(roots, succ), lambda v: v[0] in a.rejecting)


# ---------------------------------------------------------------- eFRR reference


def reference_efrr(S: FiniteSystem, Sh: FiniteSystem, q: EfrrRelation) -> set:
    """Violated (clause, x, xh, uh) keys by plain nested loops over x, xh, uh and u."""
    bad = set()
    for x in S.initial:
        ax = q.a(x)
        if len(ax) == 0 or any(xh not in Sh.initial for xh in ax):
            bad.add(("A1", x, None, None))
    for x in range(S.n_states):
        ax = q.a(x)
        for xh in ax:
            for uh in range(Sh.n_inputs):
                if len(Sh.trans[xh][uh]) == 0:
                    continue  # uh not enabled at xh
                bu = q.b(uh)
                ok_i = len(bu) > 0
                img = set()
                for u in range(S.n_inputs):
                    if u not in bu:
                        continue
                    if len(S.trans[x][u]) == 0:
                        ok_i = False
                    for x2 in S.trans[x][u]:
                        img |= q.a(x2)
                if not ok_i:
                    bad.add(("A2.i", x, xh, uh))
                if len(img) == 0 or any(v not in Sh.trans[xh][uh] for v in img):
                    bad.add(("A2.ii", x, xh, uh))
            gy = set()
            for y in S.out[x]:
                gy |= q.g(y)
            if len(gy) == 0 or any(v not in Sh.out[xh] for v in gy):
                bad.add(("A3", x, xh, None))
    return bad


def thickened_pair(seed: int, max_states: int = 4):
    """(S, S-hat, identity relation): S-hat has extra transitions, outputs and initial states.

    Half of the pairs then get one random defect so both verdicts occur.
    """
    rng = random.Random(f"thicken-{seed}")
    S = random_system(rng, rng.randint(1, max_states), rng.randint(1, 2), rng.randint(1, 3))
    n, m, p = S.n_states, S.n_inputs, S.n_outputs
    trans = [[set(S.trans[x][u]) for u in range(m)] for x in range(n)]
    out = [set(S.out[x]) for x in range(n)]
    init = set(S.initial)
    for x in range(n):
        for u in range(m):
            if rng.random() < 0.3:
                trans[x][u].add(rng.randrange(n))
        if rng.random() < 0.3:
            out[x].add(rng.randrange(p))
    if rng.random() < 0.3:
        init.add(rng.randrange(n))
    alpha = [{x} for x in range(n)]
    beta = [{u} for u in range(m)]
    gamma = [{y} for y in range(p)]
    if rng.random() < 0.5:
        kind = rng.choice(["trans", "out", "init", "alpha", "beta", "gamma"])
        x, u, y = rng.randrange(n), rng.randrange(m), rng.randrange(p)
        if kind == "trans" and trans[x][u]:
            trans[x][u].discard(rng.choice(sorted(trans[x][u])))
        elif kind == "out" and len(out[x]) > 1:
            out[x].discard(rng.choice(sorted(out[x])))
        elif kind == "init":
            init.discard(rng.choice(sorted(init)))
        elif kind == "alpha":
            alpha[x] = set() if rng.random() < 0.5 else {rng.randrange(n)}
        elif kind == "beta":
            beta[u] = set() if rng.random() < 0.3 else {rng.randrange(m)}
        elif kind == "gamma":
            gamma[y] = {rng.randrange(p)}
    Sh = FiniteSystem(
        S.state_names, S.input_names, S.output_names, frozenset(init),
        tuple(tuple(frozenset(c) for c in row) for row in trans), tuple(frozenset(o) for o in out),
    )
    q = EfrrRelation(
        tuple(frozenset(a) for a in alpha), tuple(frozenset(b) for b in beta), tuple(frozenset(g) for g in gamma)
    )
    return S, Sh, q


# ---------------------------------------------------------------- product semantics


def _spec_letters(pm: PredicateMaps, spec: Uca, x: int, u: int) -> set:
    index = {l: i for i, l in enumerate(spec.alphabet)}
    return {index[(mu, lam)] for mu in pm.input_preds[u] for lam in pm.state_preds[x]}


class _Semantics:
    """The three system-side predicates of the product language, by direct search."""

    def __init__(self, sys: FiniteSystem, pm: PredicateMaps, spec: Uca):
        self.sys, self.spec = sys, spec
        self.letters = [[_spec_letters(pm, spec, x, u) for u in range(sys.n_inputs)] for x in range(sys.n_states)]
        self.spec_succ = {}
        for x in range(sys.n_states):
            for u in range(sys.n_inputs):
                for q in range(spec.n_states):
                    s = set()
                    for l in self.letters[x][u]:
                        s |= spec.delta[q][l]
                    self.spec_succ[(x, u, q)] = tuple(sorted(s))

    def evaluate(self, word, loop):
        sys = self.sys
        n = len(word)
        nxt = [i + 1 if i + 1 < n else loop for i in range(n)]
        y0 = word[0][0]
        starts = [x for x in sys.initial if y0 in sys.out[x]]

        def path_succ(v):
            x, i = v
            j = nxt[i]
            yj = word[j][0]
            return [(x2, j) for x2 in sys.trans[x][word[i][1]] if yj in sys.out[x2]]

        epaths = _any_cycle(_explore([(x, 0) for x in starts], path_succ))

        iblock = False
        b, i, seen = frozenset(starts), 0, set()
        while b and (b, i) not in seen:
            seen.add((b, i))
            u = word[i][1]
            if any(len(sys.trans[x][u]) == 0 for x in b):
                iblock = True
                break
            j = nxt[i]
            yj = word[j][0]
            b = frozenset(x2 for x in b for x2 in sys.trans[x][u] if yj in sys.out[x2])
            i = j

        spec, ss = self.spec, self.spec_succ

        def spec_succ(v):
            x, i, q = v
            u = word[i][1]
            j = nxt[i]
            yj = word[j][0]
            qs = ss[(x, u, q)]
            return [(x2, j, q2) for x2 in sys.trans[x][u] if yj in sys.out[x2] for q2 in qs]

        roots = [(x, 0, q) for x in starts for q in spec.initial]
        holds = not _bad_cycle(_explore(roots, spec_succ), lambda v: v[2] in spec.rejecting)
        return epaths, iblock, holds


def lasso_words(n_letters: int, max_prefix: int, max_period: int):
    for lp in range(max_prefix + 1):
        for prefix in cartesian(range(n_letters), repeat=lp):
            for lq in range(1, max_period + 1):
                for period in cartesian(range(n_letters), repeat=lq):
                    yield prefix, period


@dataclass(frozen=True)
class Prop3Verdict:
    passed: bool
    checked: int
    counterexample: Optional[dict] = None


def mutate_product(p, kind: str):
    """Corrupted copies of a product: ``bottom-accepting`` or ``drop-bottom-rule``."""
    from dataclasses import replace

    a = p.uca
    if p.bottom is None:
        return p
    if kind == "bottom-accepting":
        return replace(p, uca=replace(a, rejecting=a.rejecting - {p.bottom}))
    if kind == "drop-bottom-rule":
        delta = tuple(
            row if s == p.bottom else tuple(succ - {p.bottom} for succ in row) for s, row in enumerate(a.delta)
        )
        return replace(p, uca=replace(a, delta=delta))
    raise ValueError(f"unknown mutation {kind!r}")


def oracle_prop3(inst: RandomInstance, word_bound: int = 3, product=None, stop_at_first: bool = True) -> Prop3Verdict:
    """Check in_lang <=> (not in_iblock and (not in_epaths or spec_holds)) on all lasso words.

    ``in_lang`` is read off ``product`` (built fresh when omitted); the other
    three come from the plant, predicate maps and spec directly.
    """
    from .product import build_product

    _check_caps(states=inst.sys.n_states, prefix=word_bound, period=word_bound)
    sys = inst.sys
    p = product if product is not None else build_product(sys, inst.pm, inst.spec)
    sem = _Semantics(sys, inst.pm, inst.spec)
    nU = sys.n_inputs
    pairs = [(y, u) for y in range(sys.n_outputs) for u in range(nU)]
    checked, first = 0, None
    for prefix, period in lasso_words(len(pairs), word_bound, word_bound):
        word = [pairs[l] for l in prefix + period]
        in_lang = lasso_accepts(p.uca, [y * nU + u for y, u in word[: len(prefix)]], [y * nU + u for y, u in word[len(prefix):]])
        epaths, iblock, holds = sem.evaluate(word, len(prefix))
        checked += 1
        if in_lang != ((not iblock) and ((not epaths) or holds)):
            ce = {
                "prefix": word[: len(prefix)], "period": word[len(prefix):],
                "in_lang": in_lang, "in_epaths": epaths, "in_iblock": iblock, "spec_holds": holds,
            }
            if first is None:
                first = ce
            if stop_at_first:
                return Prop3Verdict(False, checked, first)
    return Prop3Verdict(first is None, checked, first)


# ---------------------------------------------------------------- closed-loop model checking


@dataclass(frozen=True)
class McResult:
    ok: bool
    reason: Optional[str] = None  # undefined | not-enabled | rejecting-cycle
    witness: Optional[tuple] = None


class _ClosedLoop:
    """Plant x spec x controller-memory graph for a (possibly partial) Mealy table."""

    def __init__(self, sys: FiniteSystem, pm: PredicateMaps, spec: Uca):
        self.sys, self.spec = sys, spec
        self.sem = _Semantics(sys, pm, spec)

    def run(self, table, z0=0):
        """Explore; return ('open', (z, y)) at the first undefined entry, else an McResult.

        ``table(z, y)`` returns ``(u, z')``, ``None`` (undefined) or ``'open'``.
        Cycles found before hitting an open entry are real, so a partial
        table already fails when it closes a rejecting cycle.
        """
        sys, spec, ss = self.sys, self.spec, self.sem.spec_succ
        roots = [(x, q, z0) for x in sorted(sys.initial) for q in sorted(spec.initial)]
        adj = {}
        order = list(roots)
        for r in roots:
            adj[r] = None
        opened = None
        k = 0
        while k < len(order):
            v = order[k]
            k += 1
            x, q, z = v
            ws = []
            for y in sorted(sys.out[x]):
                mv = table(z, y)
                if mv == "open":
                    opened = opened or (z, y)
                    continue
                if mv is None:
                    return McResult(False, "undefined", (x, q, z, y))
                u, z2 = mv
                if not sys.trans[x][u]:
                    return McResult(False, "not-enabled", (x, q, z, y, u))
                for x2 in sorted(sys.trans[x][u]):
                    for q2 in ss[(x, u, q)]:
                        ws.append((x2, q2, z2))
            adj[v] = ws
            for w in ws:
                if w not in adj:
                    adj[w] = None
                    order.append(w)
        if _bad_cycle(adj, lambda v: v[1] in spec.rejecting):
            return McResult(False, "rejecting-cycle")
        if opened is not None:
            return ("open", opened)
        return McResult(True)


def model_check(sys: FiniteSystem, pm: PredicateMaps, spec: Uca, mealy) -> McResult:
    """Is the controller composable with the plant and are all closed-loop runs accepted by the spec?"""
    steps = mealy.step

    def table(z, y):
        return steps[z][y]

    return _ClosedLoop(sys, pm, spec).run(table, mealy.initial)


def brute_force_controller(sys: FiniteSystem, pm: PredicateMaps, spec: Uca, cap: int = 3):
    """Search Mealy tables with at most ``cap`` memory states; return one that wins, or None.

    Entries are filled lazily, only where the closed loop reaches them, and
    new memory states are introduced in order to avoid symmetric copies.
    """
    _check_caps(states=sys.n_states, mealy=cap)
    cl = _ClosedLoop(sys, pm, spec)

    def search(entries, n_mem):
        def table(z, y):
            return entries.get((z, y), "open")

        r = cl.run(table)
        if isinstance(r, McResult):
            return entries if r.ok else None
        z, y = r[1]
        for u in range(sys.n_inputs):
            for z2 in range(min(n_mem + 1, cap)):
                entries[(z, y)] = (u, z2)
                found = search(entries, max(n_mem, z2 + 1))
                if found is not None:
                    return found
                del entries[(z, y)]
        return None

    found = search({}, 1)
    if found is None:
        return None
    from .synthesis import MealyController

    n = 1 + max([z for z, _ in found] + [z2 for _, z2 in found.values()], default=0)
    step = tuple(tuple(found.get((z, y)) for y in range(sys.n_outputs)) for z in range(n))
    return MealyController(step, 0, sys.input_names, sys.output_names)


@dataclass(frozen=True)
class CompletenessVerdict:
    agree: bool
    synthesized: bool
    brute_force: bool
    controller: object = None


def oracle_thm4_completeness(inst: RandomInstance, mealy_size_cap: int = 3, k_max: Optional[int] = None):
    """Compare synthesize's realizability verdict with brute-force controller search."""
    from .synthesis import synthesize

    r = synthesize(inst.sys, inst.pm, inst.spec, k_max=k_max)
    bf = brute_force_controller(inst.sys, inst.pm, inst.spec, mealy_size_cap)
    return CompletenessVerdict(bool(r) == (bf is not None), bool(r), bf is not None, bf)


# ---------------------------------------------------------------- refinement clauses


def quotient_pair(S: FiniteSystem, pm: PredicateMaps, blocks, extra_outputs: int = 1):
    """Abstraction of S by a partition of its states, with the identity on inputs.

    F-hat(B, u) is empty unless u is enabled on all of B; outputs are kept and
    ``extra_outputs`` unused abstract outputs are appended.  Returns
    (S-hat, predicate maps of S-hat, relation).
    """
    nb = len(blocks)
    block_of = {}
    for i, B in enumerate(blocks):
        for x in B:
            block_of[x] = i
    trans = []
    for B in blocks:
        row = []
        for u in range(S.n_inputs):
            if all(S.trans[x][u] for x in B):
                row.append(frozenset(block_of[x2] for x in B for x2 in S.trans[x][u]))
            else:
                row.append(frozenset())
        trans.append(tuple(row))
    out = tuple(frozenset(y for x in B for y in S.out[x]) for B in blocks)
    names = tuple("B" + "_".join(S.state_names[x] for x in sorted(B)) for B in blocks)
    outputs = S.output_names + tuple(f"junk{i}" for i in range(extra_outputs))
    Sh = FiniteSystem(
        names, S.input_names, outputs, frozenset(block_of[x] for x in S.initial), tuple(trans), out
    )
    pmh = PredicateMaps(
        pm.ap_input, pm.ap_output, pm.input_preds,
        tuple(frozenset(l for x in B for l in pm.state_preds[x]) for B in blocks),
    )
    q = EfrrRelation(
        tuple(frozenset([block_of[x]]) for x in range(S.n_states)),
        tuple(frozenset([u]) for u in range(S.n_inputs)),
        tuple(frozenset([y]) for y in range(S.n_outputs)),
    )
    return Sh, pmh, q


@dataclass(frozen=True)
class Lemma1Verdict:
    clauses: dict  # "a".."d" -> bool
    witnesses: dict  # clause -> first failing concrete prefix
    layers: tuple  # node count per depth

    @property
    def passed(self) -> bool:
        return all(self.clauses.values())


def oracle_lemma1(S: FiniteSystem, Sh: FiniteSystem, q: EfrrRelation, rc, depth: int = 8) -> Lemma1Verdict:
    """Explore the closed loop of S with the refined controller ``rc`` to ``depth``.

    A node is a concrete prefix with its belief, the abstract memory and the
    projected abstract prefix's belief in S-hat.  Checked per node:
    (a) the tracked memory agrees with replaying the controller on the whole
    prefix and the prefix's last input is the controller's choice; (b) the
    projected prefix is generated by S-hat and the abstract controller is
    defined there; (c) every path behind the prefix maps through alpha to
    paths of S-hat generating the projected prefix; (d) the controller
    returns an input enabled in every consistent state.
    """
    from .runtime import UndefinedStrategy
    from .systems import ValidationError

    ok = {c: True for c in "abcd"}
    wit = {}

    def fail(c, prefix):
        if ok[c]:
            ok[c] = False
            wit[c] = tuple(prefix)

    def replay(prefix):
        z = rc.mealy.initial
        u = None
        for i in range(0, len(prefix), 2):
            u, z, _, _ = rc.advance(z, prefix[i])
            if i + 1 < len(prefix) and prefix[i + 1] != u:
                return None
        return z

    layer = {}
    for y in sorted({y for x in S.initial for y in S.out[x]}):
        b = frozenset(x for x in S.initial if y in S.out[x])
        try:
            yh = rc.gamma_select(q.g(y))
        except ValidationError:
            fail("b", (y,))
            continue
        bh = frozenset(xh for xh in Sh.initial if yh in Sh.out[xh])
        for x in b:
            if not q.a(x) or not q.a(x) <= Sh.initial:
                fail("c", (y,))
        layer[(b, rc.mealy.initial, bh, yh)] = ((y,), ())
    sizes = []
    for k in range(depth + 1):
        sizes.append(len(layer))
        nxt = {}
        for (b, z, bh, yh), (prefix, aprefix) in sorted(layer.items(), key=lambda kv: kv[1]):
            aprefix = aprefix + (yh,)
            if not bh:
                fail("b", prefix)
            for x in b:
                for xh in q.a(x):
                    if yh not in Sh.out[xh]:
                        fail("c", prefix)
            try:
                u, z2, _, uh = rc.advance(z, prefix[-1])
            except (UndefinedStrategy, ValidationError):
                fail("b", prefix)
                fail("d", prefix)
                continue
            if len(prefix) > 1 and replay(prefix[:-1]) != z:
                fail("a", prefix)
            if any(not S.trans[x][u] for x in b):
                fail("d", prefix)
                continue
            if k == depth:
                continue
            post = {}
            for x in b:
                for x2 in S.trans[x][u]:
                    for y2 in S.out[x2]:
                        post.setdefault(y2, set()).add(x2)
                    for xh in q.a(x):
                        if not q.a(x2) <= Sh.trans[xh][uh]:
                            fail("c", prefix + (u,))
            post_h = {xh2 for xh in bh for xh2 in Sh.trans[xh][uh]}
            for y2, b2 in sorted(post.items()):
                p2 = prefix + (u, y2)
                try:
                    yh2 = rc.gamma_select(q.g(y2))
                except ValidationError:
                    fail("b", p2)
                    continue
                bh2 = frozenset(xh for xh in post_h if yh2 in Sh.out[xh])
                key = (frozenset(b2), z2, bh2, yh2)
                if key not in nxt:
                    nxt[key] = (p2, aprefix + (uh,))
        layer = nxt
        if not layer:
            break
    return Lemma1Verdict(ok, wit, tuple(sizes))


def refined_mealy(mealy, q: EfrrRelation, n_outputs: int, gamma_select=min, beta_select=min):
    """The refined controller written as a Mealy machine over concrete outputs."""
    from .synthesis import MealyController

    rows = []
    for z in range(mealy.n_memory):
        row = []
        for y in range(n_outputs):
            ys = q.g(y)
            mv = mealy.step[z][gamma_select(ys)] if ys else None
            row.append(None if mv is None else (beta_select(q.b(mv[0])), mv[1]))
        rows.append(tuple(row))
    return MealyController(tuple(rows), mealy.initial)


LTL_CORPUS = (
    "true",
    "false",
    "p",
    "!p",
    "X p",
    "X X q",
    "p & q",
    "p | X q",
    "p -> q",
    "p <-> X q",
    "F p",
    "G p",
    "G !p",
    "G F p",
    "F G p",
    "F G !q",
    "p U q",
    "p R q",
    "!(p U q)",
    "(p U q) U r",
    "G (p -> F q)",
    "G (r -> X !p)",
    "G F p & G F q",
    "G F p -> G F q",
    "F (p & X (q & X r))",
    "G (p -> X (q U r))",
    "(G F p | F G q) & G !r",
    "X (p R (q | r))",
)


def corpus_pairs(count: int = 500, seed: int = 0, max_prefix: int = 3, max_period: int = 3):
    """(formula text, prefix, period) triples; letters are subsets of {p, q, r}."""
    rng = random.Random(f"ltl-corpus-{seed}")
    atoms = ("p", "q", "r")

    def letter():
        return frozenset(a for a in atoms if rng.random() < 0.5)

    res = []
    for i in range(count):
        text = LTL_CORPUS[i % len(LTL_CORPUS)]
        prefix = tuple(letter() for _ in range(rng.randint(0, max_prefix)))
        period = tuple(letter() for _ in range(rng.randint(1, max_period)))
        res.append((text, prefix, period))
    return res
