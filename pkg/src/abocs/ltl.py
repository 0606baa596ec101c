"""LTL formulas over input/output propositions and their translation to UCAs.

Grammar, loosest binding first::

    f ::= f <-> f | f -> f | f '|' f | f & f | f U f | f R f
        | !f | X f | F f | G f | ( f ) | true | false | atom

``->``, ``U`` and ``R`` associate to the right.  Unary operators bind
tightest, so ``F q & G !p`` is ``(F q) & (G !p)``.  Runs of the letters
F/G/X that are not declared atoms split into unary operators (``GF p``).
"""
from __future__ import annotations

import re
from dataclasses import dataclass, replace
from itertools import chain, combinations
from typing import Iterable

from .automata import NBW, UCW, Uca, complete_uca, prune, trim_rejecting, union


class Formula:
    def __and__(self, other):
        return And(self, other)

    def __or__(self, other):
        return Or(self, other)

    def __invert__(self):
        return Not(self)


@dataclass(frozen=True)
class TrueF(Formula):
    def __str__(self):
        return "true"


@dataclass(frozen=True)
class FalseF(Formula):
    def __str__(self):
        return "false"


@dataclass(frozen=True)
class Prop(Formula):
    name: str
    kind: str = "O"  # "I" for input propositions, "O" for output propositions

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula

    def __str__(self):
        return f"!{_wrap(self.arg)}"


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula

    def __str__(self):
        return f"({self.left} & {self.right})"


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula

    def __str__(self):
        return f"({self.left} | {self.right})"


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula

    def __str__(self):
        return f"({self.left} -> {self.right})"


@dataclass(frozen=True)
class Iff(Formula):
    left: Formula
    right: Formula

    def __str__(self):
        return f"({self.left} <-> {self.right})"


@dataclass(frozen=True)
class Next(Formula):
    arg: Formula

    def __str__(self):
        return f"X {_wrap(self.arg)}"


@dataclass(frozen=True)
class Eventually(Formula):
    arg: Formula

    def __str__(self):
        return f"F {_wrap(self.arg)}"


@dataclass(frozen=True)
class Always(Formula):
    arg: Formula

    def __str__(self):
        return f"G {_wrap(self.arg)}"


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula

    def __str__(self):
        return f"({self.left} U {self.right})"


@dataclass(frozen=True)
class Release(Formula):
    left: Formula
    right: Formula

    def __str__(self):
        return f"({self.left} R {self.right})"


TRUE, FALSE = TrueF(), FalseF()


def _wrap(f):
    s = str(f)
    return s if isinstance(f, (Prop, TrueF, FalseF, Not, Next, Eventually, Always)) or s.startswith("(") else f"({s})"


def atoms(f: Formula) -> set:
    if isinstance(f, Prop):
        return {f}
    res = set()
    for v in vars(f).values():
        if isinstance(v, Formula):
            res |= atoms(v)
    return res


# -- parsing -----------------------------------------------------------------

class LtlSyntaxError(ValueError):
    def __init__(self, msg, pos):
        self.pos = pos
        super().__init__(f"{msg} at position {pos}")


class UndeclaredAtom(ValueError):
    pass


_TOKEN = re.compile(r"\s*(?:(<->|->|[!&|()~])|([A-Za-z_][A-Za-z0-9_]*)|(\S))")
_UNARY = {"!": Not, "~": Not, "X": Next, "F": Eventually, "G": Always}


def _tokenize(text, declared):
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            break
        start = m.start(m.lastindex)
        op, ident, bad = m.groups()
        if bad is not None:
            raise LtlSyntaxError(f"unexpected character {bad!r}", start)
        if op is not None:
            toks.append((op, start))
        elif ident in ("true", "false", "U", "R", "X", "F", "G"):
            toks.append((ident, start))
        elif ident not in declared and set(ident) <= {"F", "G", "X"}:
            toks.extend((c, start + i) for i, c in enumerate(ident))
        else:
            toks.append(("atom:" + ident, start))
        pos = m.end()
    toks.append(("$", len(text)))
    return toks


def mentioned_atoms(text: str) -> list:
    """Atom names in ``text``, in order of first use (no declarations needed)."""
    seen = []
    for tok, _ in _tokenize(text, {}):
        if tok.startswith("atom:") and tok[5:] not in seen:
            seen.append(tok[5:])
    return seen


class _Parser:
    def __init__(self, toks, kinds):
        self.toks = toks
        self.i = 0
        self.kinds = kinds

    def peek(self):
        return self.toks[self.i][0]

    def take(self, expect=None):
        tok, pos = self.toks[self.i]
        if expect is not None and tok != expect:
            raise LtlSyntaxError(f"expected {expect!r}, found {tok.removeprefix('atom:')!r}", pos)
        self.i += 1
        return tok, pos

    def parse(self):
        f = self.iff()
        if self.peek() != "$":
            tok, pos = self.toks[self.i]
            raise LtlSyntaxError(f"unexpected {tok.removeprefix('atom:')!r}", pos)
        return f

    def iff(self):
        f = self.implies()
        while self.peek() == "<->":
            self.take()
            f = Iff(f, self.implies())
        return f

    def implies(self):
        f = self.disj()
        if self.peek() == "->":
            self.take()
            return Implies(f, self.implies())
        return f

    def disj(self):
        f = self.conj()
        while self.peek() == "|":
            self.take()
            f = Or(f, self.conj())
        return f

    def conj(self):
        f = self.binary()
        while self.peek() == "&":
            self.take()
            f = And(f, self.binary())
        return f

    def binary(self):
        f = self.unary()
        if self.peek() in ("U", "R"):
            op, _ = self.take()
            rhs = self.binary()
            return Until(f, rhs) if op == "U" else Release(f, rhs)
        return f

    def unary(self):
        tok, pos = self.toks[self.i]
        if tok in _UNARY:
            self.take()
            return _UNARY[tok](self.unary())
        if tok == "(":
            self.take()
            f = self.iff()
            self.take(")")
            return f
        if tok == "true":
            self.take()
            return TRUE
        if tok == "false":
            self.take()
            return FALSE
        if tok.startswith("atom:"):
            self.take()
            name = tok[5:]
            if name not in self.kinds:
                raise UndeclaredAtom(f"atom {name!r} at position {pos} is not declared")
            return Prop(name, self.kinds[name])
        raise LtlSyntaxError("expected a formula" if tok != "$" else "unexpected end of input", pos)


def parse_ltl(text: str, ap_input: Iterable[str] = (), ap_output: Iterable[str] = ()) -> Formula:
    """Parse ``text``; every atom must be declared as an input or output proposition."""
    kinds = {a: "I" for a in ap_input}
    for a in ap_output:
        if a in kinds:
            raise ValueError(f"proposition {a!r} declared as both input and output")
        kinds[a] = "O"
    return _Parser(_tokenize(text, kinds), kinds).parse()


# -- normal form and tableau ---------------------------------------------------

def nnf(f: Formula, neg: bool = False) -> Formula:
    """Negation normal form using only literals, &, |, X, U, R."""
    if isinstance(f, TrueF):
        return FALSE if neg else TRUE
    if isinstance(f, FalseF):
        return TRUE if neg else FALSE
    if isinstance(f, Prop):
        return Not(f) if neg else f
    if isinstance(f, Not):
        return nnf(f.arg, not neg)
    if isinstance(f, And):
        return (Or if neg else And)(nnf(f.left, neg), nnf(f.right, neg))
    if isinstance(f, Or):
        return (And if neg else Or)(nnf(f.left, neg), nnf(f.right, neg))
    if isinstance(f, Implies):
        return nnf(Or(Not(f.left), f.right), neg)
    if isinstance(f, Iff):
        return nnf(Or(And(f.left, f.right), And(Not(f.left), Not(f.right))), neg)
    if isinstance(f, Next):
        return Next(nnf(f.arg, neg))
    if isinstance(f, Eventually):
        return nnf(Until(TRUE, f.arg), neg)
    if isinstance(f, Always):
        return nnf(Release(FALSE, f.arg), neg)
    if isinstance(f, Until):
        if neg:
            return Release(nnf(f.left, True), nnf(f.right, True))
        return Until(nnf(f.left), nnf(f.right))
    if isinstance(f, Release):
        if neg:
            return Until(nnf(f.left, True), nnf(f.right, True))
        return Release(nnf(f.left), nnf(f.right))
    raise TypeError(f"not a formula: {f!r}")


def conjuncts(f: Formula) -> list:
    if isinstance(f, And):
        return conjuncts(f.left) + conjuncts(f.right)
    return [f]


def _untils(f, acc):
    if isinstance(f, Until):
        acc.add(f)
    for v in vars(f).values():
        if isinstance(v, Formula):
            _untils(v, acc)
    return acc


@dataclass(frozen=True)
class Term:
    """One disjunct of a one-step expansion."""

    pos: frozenset
    neg: frozenset
    nxt: frozenset
    postponed: frozenset

    def allows(self, props: frozenset) -> bool:
        return self.pos <= props and not (self.neg & props)


def expand(obligations: Iterable[Formula]) -> list:
    """Split a conjunction of NNF formulas into (literals now, obligations next) terms."""
    out = set()
    stack = [(tuple(obligations), frozenset(), frozenset(), frozenset(), frozenset())]
    while stack:
        todo, pos, neg, nxt, post = stack.pop()
        while todo:
            f, todo = todo[0], todo[1:]
            if isinstance(f, TrueF):
                continue
            if isinstance(f, FalseF):
                break
            if isinstance(f, Prop):
                if f.name in neg:
                    break
                pos = pos | {f.name}
            elif isinstance(f, Not):
                if f.arg.name in pos:
                    break
                neg = neg | {f.arg.name}
            elif isinstance(f, And):
                todo = (f.left, f.right) + todo
            elif isinstance(f, Or):
                stack.append(((f.right,) + todo, pos, neg, nxt, post))
                todo = (f.left,) + todo
            elif isinstance(f, Next):
                nxt = nxt | {f.arg}
            elif isinstance(f, Until):
                stack.append(((f.left,) + todo, pos, neg, nxt | {f}, post | {f}))
                todo = (f.right,) + todo
            elif isinstance(f, Release):
                stack.append(((f.right,) + todo, pos, neg, nxt | {f}, post))
                todo = (f.left, f.right) + todo
            else:
                raise TypeError(f"formula not in negation normal form: {f}")
        else:
            out.add(Term(pos, neg, frozenset(g for g in nxt if not isinstance(g, TrueF)), post))
    return sorted(out, key=lambda t: (sorted(t.pos), sorted(t.neg), sorted(map(str, t.nxt))))


def spec_alphabet(ap_input: Iterable[str], ap_output: Iterable[str]) -> tuple:
    """All letters (input valuation, output valuation), deterministic order."""

    def subsets(aps):
        aps = sorted(aps)
        return [frozenset(c) for c in chain.from_iterable(combinations(aps, r) for r in range(len(aps) + 1))]

    return tuple((mu, lam) for mu in subsets(ap_input) for lam in subsets(ap_output))


def _state_name(obls, level):
    body = " & ".join(sorted(map(str, obls))) or "true"
    return f"[{body}]#{level}"


def tableau_nba(f: Formula, alphabet: tuple) -> Uca:
    """Buchi automaton (state-based, degeneralized) for the NNF formula ``f``.

    The structure is returned as a ``Uca`` read with Buchi acceptance; the
    rejecting set holds the accepting states of the NBA.
    """
    untils = sorted(_untils(f, set()), key=str)
    m = len(untils)
    props = [mu | lam for mu, lam in alphabet]
    init = frozenset([f]) - {TRUE}
    index = {(init, 0): 0}
    names = [_state_name(init, 0)]
    delta = []
    queue = [(init, 0)]
    expansions = {}
    while len(delta) < len(queue):
        obls, level = queue[len(delta)]
        if obls not in expansions:
            expansions[obls] = expand(obls)
        start = 0 if level == m else level
        row = [set() for _ in alphabet]
        for term in expansions[obls]:
            j = start
            while j < m and untils[j] not in term.postponed:
                j += 1
            key = (term.nxt, j)
            if key not in index:
                index[key] = len(queue)
                queue.append(key)
                names.append(_state_name(*key))
            target = index[key]
            for a, p in enumerate(props):
                if term.allows(p):
                    row[a].add(target)
        delta.append(tuple(frozenset(s) for s in row))
    accepting = frozenset(i for i, (_, lvl) in enumerate(queue) if lvl == m)
    return Uca(tuple(names), frozenset([0]), alphabet, tuple(delta), accepting, NBW)


def ltl_to_uca(phi: Formula, ap_input: Iterable[str] = None, ap_output: Iterable[str] = None) -> Uca:
    """Complete UCA over 2^AP_I x 2^AP_O whose language is the models of ``phi``.

    Each top-level conjunct is negated and translated by the tableau; the
    Buchi structures are then read universally and joined, which intersects
    their languages.  Omitted proposition sets default to the atoms of ``phi``.
    """
    if ap_input is None:
        ap_input = {a.name for a in atoms(phi) if a.kind == "I"}
    if ap_output is None:
        ap_output = {a.name for a in atoms(phi) if a.kind == "O"}
    alphabet = spec_alphabet(ap_input, ap_output)
    parts = []
    for c in conjuncts(nnf(phi)):
        nba = tableau_nba(nnf(c, neg=True), alphabet)
        parts.append(trim_rejecting(prune(nba)))
    joined = replace(union(parts), kind=UCW) if len(parts) > 1 else replace(parts[0], kind=UCW)
    return complete_uca(joined)
