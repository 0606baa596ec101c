"""Synthesis automaton: product of a finite system with a specification UCA.

The product reads letters (y, u) of the system's outputs and inputs.  Its
states are pairs (x, q) plus a blocking state ``bottom`` that is entered
whenever the played input is disabled in a state consistent with the
observation; ``bottom`` is absorbing and rejecting.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product as cartesian
from typing import Optional, Sequence

from .automata import UCW, Uca, uca_accepts_lasso
from .graphs import has_marked_cycle, reachable
from .systems import FiniteSystem, PredicateMaps, belief_update


class AlphabetMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ProductUca:
    uca: Uca
    pairs: tuple  # state index -> (x, q), or None for bottom
    bottom: Optional[int]
    n_outputs: int
    n_inputs: int
    source: Optional[tuple] = field(default=None, compare=False, repr=False)  # (system, spec, step letters)

    def letter(self, y: int, u: int) -> int:
        return y * self.n_inputs + u

    def decode(self, letter: int) -> tuple:
        return divmod(letter, self.n_inputs)

    def state_of(self, x: int, q: int) -> Optional[int]:
        return self._rev().get((x, q))

    def _rev(self):
        rev = self.__dict__.get("_rev_cache")
        if rev is None:
            rev = {p: i for i, p in enumerate(self.pairs) if p is not None}
            object.__setattr__(self, "_rev_cache", rev)
        return rev


def step_letters(sys: FiniteSystem, pm: PredicateMaps, spec: Uca, strict: bool = False) -> list:
    """``out[x][u]``: spec letter ids read when leaving x under u.

    With ``strict`` the output predicates are taken from every state that
    shares an output with x (the output-anchored reading), otherwise from x.
    """
    if not pm.matches(sys):
        raise AlphabetMismatch("predicate maps do not match the system")
    index = {l: i for i, l in enumerate(spec.alphabet)}
    lam_of = []
    for x in range(sys.n_states):
        if strict:
            lam = set()
            for x2 in range(sys.n_states):
                if sys.out[x] & sys.out[x2]:
                    lam |= pm.state_preds[x2]
        else:
            lam = pm.state_preds[x]
        lam_of.append(lam)
    res = []
    for x in range(sys.n_states):
        row = []
        for u in range(sys.n_inputs):
            ids = set()
            for mu, lam in cartesian(pm.input_preds[u], lam_of[x]):
                try:
                    ids.add(index[(mu, lam)])
                except KeyError:
                    raise AlphabetMismatch(f"letter {(sorted(mu), sorted(lam))} is not in the spec alphabet") from None
            row.append(tuple(sorted(ids)))
        res.append(row)
    return res


def build_product(
    sys: FiniteSystem, pm: PredicateMaps, spec: Uca, strict: bool = False, prune: bool = True
) -> ProductUca:
    """Build the synthesis UCA.

    From (x, q) on letter (y, u) with y in H(x): go to bottom if F(x, u) is
    empty, otherwise to every (x', q') with x' in F(x, u) and q' reached by
    the spec on some predicate letter of (u, x).  Letters with y outside H(x)
    have no successor.  With ``prune`` only the reachable part is built.
    """
    if not spec.is_complete():
        raise ValueError("the specification UCA must be complete")
    letters = step_letters(sys, pm, spec, strict)
    nU = sys.n_inputs
    alphabet = tuple((y, u) for y in range(sys.n_outputs) for u in range(nU))
    BOT = "bottom"

    def succ_row(node):
        row = []
        if node == BOT:
            return [frozenset([BOT])] * len(alphabet)
        x, q = node
        for y in range(sys.n_outputs):
            visible = y in sys.out[x]
            for u in range(nU):
                if not visible:
                    row.append(frozenset())
                elif not sys.trans[x][u]:
                    row.append(frozenset([BOT]))
                else:
                    qs = set()
                    for l in letters[x][u]:
                        qs |= spec.delta[q][l]
                    row.append(frozenset((x2, q2) for x2 in sys.trans[x][u] for q2 in qs))
        return row

    init = sorted((x, q) for x in sys.initial for q in spec.initial)
    if prune:
        rows = {}

        def succ(node):
            if node not in rows:
                rows[node] = succ_row(node)
            return sorted(set().union(*rows[node]), key=_node_key)

        nodes = reachable(init, succ)
    else:
        nodes = [(x, q) for x in range(sys.n_states) for q in range(spec.n_states)] + [BOT]
        rows = {v: succ_row(v) for v in nodes}
    nodes = sorted(nodes, key=_node_key)
    idx = {v: i for i, v in enumerate(nodes)}
    delta = tuple(tuple(frozenset(idx[w] for w in s) for s in rows[v]) for v in nodes)
    rejecting = frozenset(i for i, v in enumerate(nodes) if v == BOT or v[1] in spec.rejecting)
    names = tuple("bottom" if v == BOT else f"({sys.state_names[v[0]]},{spec.state_names[v[1]]})" for v in nodes)
    uca = Uca(names, frozenset(idx[v] for v in init), alphabet, delta, rejecting, UCW)
    pairs = tuple(None if v == BOT else v for v in nodes)
    return ProductUca(uca, pairs, idx.get(BOT), sys.n_outputs, nU, (sys, spec, letters))


def _node_key(v):
    return (1, 0, 0) if v == "bottom" else (0,) + tuple(v)


def product_letter_names(sys: FiniteSystem) -> list:
    return [f"{y},{u}" for y in sys.output_names for u in sys.input_names]


class LassoSemantics:
    """Evaluates, on lasso words over (y, u), the four quantities related by
    the product's language characterisation:

    ``in_lang``    the word is accepted by the product UCA,
    ``in_epaths``  some infinite path of the system generates the word,
    ``in_iblock``  some prefix plays an input disabled in a consistent state,
    ``spec_holds`` every predicate sequence of every generating path is a model.

    Only ``in_lang`` looks at the product; the others work on the system,
    predicate maps and spec directly.
    """

    def __init__(self, sys: FiniteSystem, pm: PredicateMaps, spec: Uca, product: ProductUca = None):
        self.sys, self.pm, self.spec = sys, pm, spec
        self.product = product if product is not None else build_product(sys, pm, spec)
        self._letters = step_letters(sys, pm, spec)

    def in_lang(self, prefix, period) -> bool:
        p = self.product
        return uca_accepts_lasso(p.uca, list(prefix), list(period))

    def _positions(self, prefix, period):
        word = list(prefix) + list(period)
        n, loop = len(word), len(prefix)
        return word, (lambda i: i + 1 if i + 1 < n else loop)

    def in_epaths(self, prefix, period) -> bool:
        sys = self.sys
        word, nxt = self._positions(prefix, period)
        roots = [(x, 0) for x in sorted(sys.initial) if word[0][0] in sys.out[x]]

        def succ(node):
            x, i = node
            j = nxt(i)
            return [(x2, j) for x2 in sys.trans[x][word[i][1]] if word[j][0] in sys.out[x2]]

        return has_marked_cycle(roots, succ, lambda node: True)

    def in_iblock(self, prefix, period) -> bool:
        sys = self.sys
        word, nxt = self._positions(prefix, period)
        b = frozenset(x for x in sys.initial if word[0][0] in sys.out[x])
        i = 0
        seen = set()
        while b and (b, i) not in seen:
            seen.add((b, i))
            u = word[i][1]
            if any(not sys.trans[x][u] for x in b):
                return True
            j = nxt(i)
            b = belief_update(sys, b, u, word[j][0])
            i = j
        return False

    def spec_holds(self, prefix, period) -> bool:
        sys, spec = self.sys, self.spec
        word, nxt = self._positions(prefix, period)
        roots = [(x, 0, q) for x in sorted(sys.initial) if word[0][0] in sys.out[x] for q in sorted(spec.initial)]
        letters = self._letters

        def succ(node):
            x, i, q = node
            u = word[i][1]
            j = nxt(i)
            qs = set()
            for l in letters[x][u]:
                qs |= spec.delta[q][l]
            return [(x2, j, q2) for x2 in sys.trans[x][u] if word[j][0] in sys.out[x2] for q2 in qs]

        rej = spec.rejecting
        return not has_marked_cycle(roots, succ, lambda node: node[2] in rej)

    def check(self, prefix, period) -> dict:
        prefix = [tuple(l) for l in prefix]
        period = [tuple(l) for l in period]
        if not period:
            raise ValueError("period must be non-empty")
        return {
            "in_lang": self.in_lang(prefix, period),
            "in_epaths": self.in_epaths(prefix, period),
            "in_iblock": self.in_iblock(prefix, period),
            "spec_holds": self.spec_holds(prefix, period),
        }


def iblock_semantics_check(
    sys: FiniteSystem, pm: PredicateMaps, spec: Uca, prefix: Sequence, period: Sequence, product: ProductUca = None
) -> dict:
    """Measure in_lang / in_epaths / in_iblock / spec_holds on a lasso of (y, u) pairs."""
    return LassoSemantics(sys, pm, spec, product).check(prefix, period)
