"""Universal co-Buchi automata over explicit alphabets.

A word is accepted iff every infinite run on it visits the rejecting set
finitely often; runs that get stuck are ignored.  The same structure read
with non-deterministic Buchi acceptance is the dual automaton, which is why
``kind`` is carried along and ``dualize`` only flips it.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from .graphs import has_marked_cycle, on_cycle, reachable

UCW = "universal-co-buchi"
NBW = "nondeterministic-buchi"


@dataclass(frozen=True)
class Uca:
    """Explicit automaton; ``delta[q][a]`` is the successor set of state q on letter index a."""

    state_names: tuple
    initial: frozenset
    alphabet: tuple
    delta: tuple
    rejecting: frozenset
    kind: str = UCW
    sink: Optional[int] = None
    _letter_index: dict = field(default=None, compare=False, repr=False, hash=False)

    def __post_init__(self):
        n = len(self.state_names)
        if len(self.delta) != n or any(len(row) != len(self.alphabet) for row in self.delta):
            raise ValueError("delta shape does not match states x alphabet")
        if not self.rejecting <= frozenset(range(n)):
            raise ValueError("rejecting set must be a subset of the states")
        if not self.initial <= frozenset(range(n)):
            raise ValueError("initial set must be a subset of the states")
        object.__setattr__(self, "_letter_index", {l: i for i, l in enumerate(self.alphabet)})

    @property
    def n_states(self) -> int:
        return len(self.state_names)

    def letter_id(self, letter) -> int:
        try:
            return self._letter_index[letter]
        except KeyError:
            raise ValueError(f"letter {letter!r} is not in the alphabet") from None

    def is_complete(self) -> bool:
        """Structural completeness: every state has a successor on every letter."""
        return all(all(row) for row in self.delta)

    def successors(self, q: int) -> set:
        res = set()
        for s in self.delta[q]:
            res |= s
        return res


def dualize(a: Uca) -> Uca:
    """Flip between universal co-Buchi and non-deterministic Buchi reading."""
    return replace(a, kind=NBW if a.kind == UCW else UCW)


def complete_uca(a: Uca) -> Uca:
    """Redirect every missing (state, letter) edge to a non-rejecting absorbing sink."""
    if a.is_complete():
        return a
    n = a.n_states
    all_letters = tuple(frozenset([n]) for _ in a.alphabet)
    delta = tuple(
        tuple(s if s else frozenset([n]) for s in row) for row in a.delta
    ) + (all_letters,)
    return Uca(a.state_names + ("sink",), a.initial, a.alphabet, delta, a.rejecting, a.kind, sink=n)


def prune(a: Uca) -> Uca:
    """Drop unreachable states and renumber; the language is unchanged."""
    order = reachable(sorted(a.initial), lambda q: sorted(a.successors(q)))
    keep = sorted(order)
    if len(keep) == a.n_states:
        return a
    ren = {q: i for i, q in enumerate(keep)}
    delta = tuple(
        tuple(frozenset(ren[s] for s in a.delta[q][l]) for l in range(len(a.alphabet))) for q in keep
    )
    return Uca(
        tuple(a.state_names[q] for q in keep),
        frozenset(ren[q] for q in a.initial),
        a.alphabet,
        delta,
        frozenset(ren[q] for q in a.rejecting if q in ren),
        a.kind,
        sink=ren.get(a.sink) if a.sink is not None else None,
    )


def trim_rejecting(a: Uca) -> Uca:
    """Keep only rejecting states that lie on a cycle (others are visited at most once)."""
    cyc = on_cycle(range(a.n_states), lambda q: a.successors(q))
    return replace(a, rejecting=frozenset(q for q in a.rejecting if q in cyc))


def union(parts: Sequence[Uca]) -> Uca:
    """Disjoint union; read universally this is the intersection of the languages."""
    alphabet = parts[0].alphabet
    names, initial, delta, rejecting = [], set(), [], set()
    for i, p in enumerate(parts):
        if p.alphabet != alphabet:
            raise ValueError("union needs a common alphabet")
        off = len(names)
        names.extend(f"{i}:{s}" for s in p.state_names)
        initial.update(q + off for q in p.initial)
        rejecting.update(q + off for q in p.rejecting)
        delta.extend(tuple(frozenset(s + off for s in succ) for succ in row) for row in p.delta)
    return Uca(tuple(names), frozenset(initial), alphabet, tuple(delta), frozenset(rejecting), parts[0].kind)


def lasso_graph(a: Uca, prefix: Sequence, period: Sequence):
    """Successor function of the (state, position) unravelling of ``prefix period^omega``."""
    if not period:
        raise ValueError("period must be non-empty")
    word = [a.letter_id(l) for l in prefix] + [a.letter_id(l) for l in period]
    n, loop = len(word), len(prefix)
    delta = a.delta

    def succ(node):
        q, i = node
        j = i + 1 if i + 1 < n else loop
        return [(s, j) for s in delta[q][word[i]]]

    return [(q, 0) for q in sorted(a.initial)], succ


def uca_accepts_lasso(a: Uca, prefix: Sequence, period: Sequence) -> bool:
    """Universal co-Buchi acceptance of the ultimately periodic word ``prefix period^omega``."""
    roots, succ = lasso_graph(a, prefix, period)
    rej = a.rejecting
    return not has_marked_cycle(roots, succ, lambda node: node[0] in rej)


def nba_accepts_lasso(a: Uca, prefix: Sequence, period: Sequence) -> bool:
    """Non-deterministic Buchi acceptance on the same structure (the dual reading)."""
    roots, succ = lasso_graph(a, prefix, period)
    rej = a.rejecting
    return has_marked_cycle(roots, succ, lambda node: node[0] in rej)


def accepts_lasso(a: Uca, prefix: Sequence, period: Sequence) -> bool:
    if a.kind == UCW:
        return uca_accepts_lasso(a, prefix, period)
    return nba_accepts_lasso(a, prefix, period)


def lift_alphabet(a: Uca, alphabet: tuple) -> Uca:
    """Same automaton over a larger spec alphabet; new propositions are ignored."""
    old_i = frozenset().union(*(mu for mu, _ in a.alphabet))
    old_o = frozenset().union(*(lam for _, lam in a.alphabet))
    new_i = frozenset().union(*(mu for mu, _ in alphabet))
    new_o = frozenset().union(*(lam for _, lam in alphabet))
    if not (old_i <= new_i and old_o <= new_o):
        raise ValueError("the new alphabet must contain every old proposition")
    idx = [a.letter_id((mu & old_i, lam & old_o)) for mu, lam in alphabet]
    delta = tuple(tuple(row[i] for i in idx) for row in a.delta)
    return replace(a, alphabet=tuple(alphabet), delta=delta)
