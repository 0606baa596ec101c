"""Finite transition systems with set-valued transitions and outputs.

States, inputs and outputs are dense integer ids; the names are kept in
symbol tables on the system so files and traces stay human readable.

An external prefix is a flat tuple ``(y0, u0, y1, u1, ..., yk)`` of output
and input ids.  A belief is the frozenset of states consistent with such a
prefix.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Iterable, Mapping, Optional, Union

Belief = frozenset
Letter = frozenset  # a set of currently true atomic propositions

StrategyAnswer = Union[int, None, Iterable[int]]
Strategy = Callable[[tuple], StrategyAnswer]


class ValidationError(ValueError):
    """Raised for malformed systems or unknown ids."""


class CompositionError(Exception):
    """A strategy is not feedback-composable with a system."""

    def __init__(self, prefix: tuple, reason: str):
        assert reason in ("undefined", "not-enabled")
        self.prefix = tuple(prefix)
        self.reason = reason
        super().__init__(f"{reason} at prefix {self.prefix}")


@dataclass(frozen=True)
class FiniteSystem:
    """S = (X, X0, U, F, Y, H) over dense ids.

    ``trans[x][u]`` is the frozenset F(x, u); ``out[x]`` is H(x).
    """

    state_names: tuple
    input_names: tuple
    output_names: tuple
    initial: frozenset
    trans: tuple
    out: tuple
    _index: dict = field(default=None, compare=False, repr=False, hash=False)

    def __post_init__(self):
        n, m, p = len(self.state_names), len(self.input_names), len(self.output_names)
        if len(self.trans) != n or any(len(row) != m for row in self.trans):
            raise ValidationError("transition table shape does not match states x inputs")
        if len(self.out) != n:
            raise ValidationError("output table must list every state")
        for x in self.initial:
            if not 0 <= x < n:
                raise ValidationError(f"initial state {x} is not declared")
        for x, row in enumerate(self.trans):
            for u, succ in enumerate(row):
                for s in succ:
                    if not 0 <= s < n:
                        raise ValidationError(f"F({x},{u}) references unknown state {s}")
        for x, ys in enumerate(self.out):
            if not ys:
                raise ValidationError(f"H({self.state_names[x]}) is empty; outputs must cover states")
            for y in ys:
                if not 0 <= y < p:
                    raise ValidationError(f"H({x}) references unknown output {y}")
        for names in (self.state_names, self.input_names, self.output_names):
            if len(set(names)) != len(names):
                raise ValidationError(f"duplicate names in {names}")
        index = {
            "state": {s: i for i, s in enumerate(self.state_names)},
            "input": {s: i for i, s in enumerate(self.input_names)},
            "output": {s: i for i, s in enumerate(self.output_names)},
        }
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_tables(
        cls,
        states: Iterable[str],
        initial: Iterable[str],
        inputs: Iterable[str],
        outputs: Iterable[str],
        trans: Mapping[tuple, Iterable[str]],
        out: Mapping[str, Iterable[str]],
    ) -> "FiniteSystem":
        """Build a system from name-keyed tables.

        Missing ``(x, u)`` entries in ``trans`` mean F(x, u) is empty.
        """
        states, inputs, outputs = tuple(states), tuple(inputs), tuple(outputs)
        si = {s: i for i, s in enumerate(states)}
        ui = {s: i for i, s in enumerate(inputs)}
        yi = {s: i for i, s in enumerate(outputs)}

        def look(table, name, kind):
            try:
                return table[name]
            except KeyError:
                raise ValidationError(f"unknown {kind} {name!r}") from None

        rows = [[set() for _ in inputs] for _ in states]
        for (x, u), succ in trans.items():
            rows[look(si, x, "state")][look(ui, u, "input")].update(look(si, s, "state") for s in succ)
        outs = [frozenset() for _ in states]
        for x, ys in out.items():
            outs[look(si, x, "state")] = frozenset(look(yi, y, "output") for y in ys)
        return cls(
            states,
            inputs,
            outputs,
            frozenset(look(si, x, "state") for x in initial),
            tuple(tuple(frozenset(c) for c in row) for row in rows),
            tuple(outs),
        )

    @property
    def n_states(self) -> int:
        return len(self.state_names)

    @property
    def n_inputs(self) -> int:
        return len(self.input_names)

    @property
    def n_outputs(self) -> int:
        return len(self.output_names)

    def state_id(self, name) -> int:
        return self._lookup("state", name)

    def input_id(self, name) -> int:
        return self._lookup("input", name)

    def output_id(self, name) -> int:
        return self._lookup("output", name)

    def _lookup(self, kind, name):
        if isinstance(name, int):
            return name
        try:
            return self._index[kind][name]
        except KeyError:
            raise ValidationError(f"unknown {kind} {name!r}") from None

    def enabled(self, x: int) -> frozenset:
        """Enab(x) for a single state."""
        return frozenset(u for u, succ in enumerate(self.trans[x]) if succ)

    def post(self, states: Iterable[int], u: int) -> frozenset:
        res = set()
        for x in states:
            res |= self.trans[x][u]
        return frozenset(res)

    def check_states(self, states: Iterable[int]) -> None:
        for x in states:
            if not isinstance(x, int) or not 0 <= x < self.n_states:
                raise ValidationError(f"unknown state id {x!r}")

    def check_input(self, u) -> None:
        if not isinstance(u, int) or not 0 <= u < self.n_inputs:
            raise ValidationError(f"unknown input id {u!r}")

    def check_output(self, y) -> None:
        if not isinstance(y, int) or not 0 <= y < self.n_outputs:
            raise ValidationError(f"unknown output id {y!r}")


@dataclass(frozen=True)
class PredicateMaps:
    """Set-valued predicate maps P_I : U => 2^AP_I and P_O : X => 2^AP_O.

    ``input_preds[u]`` and ``state_preds[x]`` are frozensets of letters,
    each letter a frozenset of proposition names.
    """

    ap_input: tuple
    ap_output: tuple
    input_preds: tuple
    state_preds: tuple

    def __post_init__(self):
        api, apo = set(self.ap_input), set(self.ap_output)
        if api & apo:
            raise ValidationError(f"propositions {sorted(api & apo)} are both input and output")
        for kind, table, aps in (("input", self.input_preds, api), ("state", self.state_preds, apo)):
            for i, letters in enumerate(table):
                if not letters:
                    raise ValidationError(f"{kind} {i} has no predicate letter")
                for letter in letters:
                    if not letter <= aps:
                        raise ValidationError(f"{kind} {i}: undeclared propositions {sorted(letter - aps)}")

    @classmethod
    def from_tables(cls, sys: FiniteSystem, ap_input, ap_output, input_preds=None, state_preds=None):
        """Name-keyed construction; missing entries default to the empty letter."""
        empty = frozenset([frozenset()])
        ip = [empty] * sys.n_inputs
        sp = [empty] * sys.n_states
        for u, letters in (input_preds or {}).items():
            ip[sys.input_id(u)] = frozenset(frozenset(l) for l in letters)
        for x, letters in (state_preds or {}).items():
            sp[sys.state_id(x)] = frozenset(frozenset(l) for l in letters)
        return cls(tuple(ap_input), tuple(ap_output), tuple(ip), tuple(sp))

    def matches(self, sys: FiniteSystem) -> bool:
        return len(self.input_preds) == sys.n_inputs and len(self.state_preds) == sys.n_states


def enab_set(sys: FiniteSystem, states: Iterable[int]) -> frozenset:
    """Enabled inputs of a set of states, lifted by intersection.

    The empty set yields every input.
    """
    states = list(states)
    sys.check_states(states)
    res = set(range(sys.n_inputs))
    for x in states:
        res &= sys.enabled(x)
    return frozenset(res)


def belief_update(sys: FiniteSystem, b: Iterable[int], u: int, y: int) -> frozenset:
    sys.check_input(u)
    sys.check_output(y)
    return frozenset(x2 for x2 in sys.post(b, u) if y in sys.out[x2])


def initial_beliefs(sys: FiniteSystem) -> dict:
    """Map every output of an initial state to the initial states emitting it."""
    res: dict = {}
    for x in sorted(sys.initial):
        for y in sys.out[x]:
            res.setdefault(y, set()).add(x)
    return {y: frozenset(b) for y, b in sorted(res.items())}


def check_prefix(sys: FiniteSystem, prefix) -> tuple:
    prefix = tuple(prefix)
    if len(prefix) % 2 != 1:
        raise ValidationError("external prefix must start and end with an output")
    for i, v in enumerate(prefix):
        (sys.check_output if i % 2 == 0 else sys.check_input)(v)
    return prefix


def last_states(sys: FiniteSystem, prefix) -> frozenset:
    """Last_S(prefix): states reachable by some path generating ``prefix``."""
    prefix = check_prefix(sys, prefix)
    b = frozenset(x for x in sys.initial if prefix[0] in sys.out[x])
    for i in range(1, len(prefix), 2):
        if not b:
            break
        b = belief_update(sys, b, prefix[i], prefix[i + 1])
    return b


def iblock_prefix(sys: FiniteSystem, prefix, u: int) -> bool:
    """True iff playing ``u`` after ``prefix`` makes every extension blocking."""
    b = last_states(sys, prefix)
    sys.check_input(u)
    return bool(b) and u not in enab_set(sys, b)


def enumerate_paths(sys: FiniteSystem, depth: int) -> set:
    """Prefixes of maximal paths with ``depth`` transitions (exponential; oracle use).

    Shorter paths are kept only when they end in a state with no enabled input.
    """
    if depth < 0:
        raise ValueError("depth must be non-negative")
    frontier = [(x,) for x in sorted(sys.initial)]
    done = set()
    for _ in range(depth):
        nxt = []
        for path in frontier:
            x = path[-1]
            moved = False
            for u in range(sys.n_inputs):
                for x2 in sorted(sys.trans[x][u]):
                    nxt.append(path + (u, x2))
                    moved = True
            if not moved:
                done.add(path)
        frontier = nxt
    return done | set(frontier)


def generate_predicates(pm: PredicateMaps, path) -> set:
    """All predicate sequences ``lambda0 mu0 lambda1 ...`` generated by ``path``."""
    options = []
    for i, v in enumerate(path):
        options.append(sorted(pm.state_preds[v] if i % 2 == 0 else pm.input_preds[v], key=sorted))
    return set(product(*options))


def strategy_inputs(answer: StrategyAnswer) -> frozenset:
    if answer is None:
        return frozenset()
    if isinstance(answer, int):
        return frozenset([answer])
    return frozenset(answer)


def closed_loop_prefixes(sys: FiniteSystem, ctrl: Strategy, k: int) -> set:
    """EPrefs^k of the closed loop; raises CompositionError on a violation.

    ``ctrl`` maps an external prefix to an input id, ``None`` or a set of
    inputs (all of which must then be enabled).
    """
    layer = {(y,): b for y, b in initial_beliefs(sys).items()}
    for _ in range(k):
        nxt = {}
        for nu, b in sorted(layer.items()):
            inputs = strategy_inputs(ctrl(nu))
            if not inputs:
                raise CompositionError(nu, "undefined")
            enab = enab_set(sys, b)
            for u in sorted(inputs):
                if u not in enab:
                    raise CompositionError(nu, "not-enabled")
                succ = sys.post(b, u)
                for y in sorted({y for x in succ for y in sys.out[x]}):
                    nxt[nu + (u, y)] = frozenset(x for x in succ if y in sys.out[x])
        layer = nxt
    return set(layer)
