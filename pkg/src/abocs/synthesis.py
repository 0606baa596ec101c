"""Bounded synthesis for the product automaton.

The universal co-Buchi product is determinized into a safety game whose
positions are counter functions: for each product state reachable on the
observed prefix, the largest number of rejecting visits along any run that
ends there.  The environment picks the next output, the controller picks an
input, and the controller loses as soon as some counter exceeds ``k``.
Winning strategies are positional on counter functions, so the reachable
counter functions under a fixed strategy form the controller memory.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

from .product import ProductUca, build_product
from .systems import FiniteSystem, PredicateMaps

UNSAFE = -1  # shared id of every node with a counter above k
DEAD = None  # output inconsistent with every tracked state


@dataclass(frozen=True)
class CounterFunction:
    """Canonical game position.

    ``belief`` is the set of plant states consistent with the prefix.
    ``support`` is the set of product states reached by some run that can
    still visit a rejecting state; ``items`` are sorted ``(group, count)``
    pairs.  With exact counters a group is a single product state.  With
    ``spec`` grouping the support holds specification states, each with one
    counter, advanced on every letter the belief allows; this
    over-approximates the exact counters.
    """

    support: frozenset
    items: tuple
    belief: frozenset = frozenset()

    def as_dict(self) -> dict:
        return dict(self.items)

    def states(self) -> frozenset:
        return self.support

    def max_count(self) -> int:
        return max((c for _, c in self.items), default=-1)

    def leq(self, other: "CounterFunction") -> bool:
        """Pointwise order: smaller belief and support, each count at most the other's."""
        if not (self.support <= other.support and self.belief <= other.belief):
            return False
        d = other.as_dict()
        return all(g in d and c <= d[g] for g, c in self.items)


@dataclass(frozen=True)
class SafetyGame:
    """Explicit bipartite game.

    ``env[e]`` is the counter function of environment node e.  ``moves[e][y]``
    is DEAD when y is impossible there, else a tuple indexed by input of the
    successor environment node id (or UNSAFE).
    """

    k: int
    env: tuple
    moves: tuple
    n_outputs: int
    n_inputs: int
    initial: int = 0

    @property
    def n_env(self) -> int:
        return len(self.env)

    def n_system(self) -> int:
        return sum(1 for row in self.moves for m in row if m is not DEAD)


def _relevant_and_doomed(p: ProductUca):
    """Product states that can still reach a rejecting state, and those that are doomed.

    A doomed state is rejecting and the environment, choosing outputs, can
    keep every continuation inside doomed states whatever the inputs are; a
    position tracking one loses for every k.
    """
    a = p.uca
    n, nY, nU = a.n_states, p.n_outputs, p.n_inputs
    preds = [set() for _ in range(n)]
    for q in range(n):
        for succ in a.delta[q]:
            for q2 in succ:
                preds[q2].add(q)
    relevant = set(a.rejecting)
    stack = list(relevant)
    while stack:
        q = stack.pop()
        for r in preds[q]:
            if r not in relevant:
                relevant.add(r)
                stack.append(r)
    doomed = set(a.rejecting)
    changed = True
    while changed:
        changed = False
        for q in sorted(doomed):
            ok = any(
                a.delta[q][y * nU] and all(a.delta[q][y * nU + u] & doomed for u in range(nU)) for y in range(nY)
            )
            if not ok:
                doomed.discard(q)
                changed = True
    return frozenset(relevant), frozenset(doomed)


BOTTOM = -1  # plant-level marker of a disabled input


class _Stepper:
    """Exact positions: supports of product states, one counter each.

    Successors are memoized on (belief, letter) and (support, letter).
    """

    def __init__(self, p: ProductUca):
        a = p.uca
        self.delta = a.delta
        self.rej = [1 if q in a.rejecting else 0 for q in range(a.n_states)]
        self.nU = p.n_inputs
        self.relevant, self.doomed = _relevant_and_doomed(p)
        # plant-level successors recovered from the product (the spec is complete)
        n_letters = len(a.alphabet)
        self.plant = {}
        for s, pair in enumerate(p.pairs):
            if pair is None or pair[0] in self.plant:
                continue
            row = []
            for l in range(n_letters):
                row.append(frozenset(BOTTOM if p.pairs[s2] is None else p.pairs[s2][0] for s2 in a.delta[s][l]))
            self.plant[pair[0]] = row
        nY = p.n_outputs
        self.out = {x: [y for y in range(nY) if row[y * self.nU]] for x, row in self.plant.items()}
        self.outset = {x: frozenset(ys) for x, ys in self.out.items()}
        self.sout = [frozenset() if pair is None else self.outset[pair[0]] for pair in p.pairs]
        self._step = {}
        self._belief = {}
        self._p = p

    def initial(self) -> Optional[CounterFunction]:
        p = self._p
        init = p.uca.initial
        if init & self.doomed:
            return None
        support = frozenset(s for s in init if s in self.relevant)
        items = tuple(sorted((s, self.rej[s]) for s in support))
        belief = frozenset(p.pairs[s][0] for s in init if p.pairs[s] is not None)
        return CounterFunction(support, items, belief)

    def outputs(self, cf: CounterFunction) -> list:
        """Outputs some belief state can emit, ascending."""
        return sorted({y for x in cf.belief for y in self.out[x]})

    def observe(self, cf: CounterFunction, y: int) -> tuple:
        """What the successors after y depend on: the belief and support states that can emit y."""
        sout = self.sout
        return (
            frozenset(x for x in cf.belief if y in self.outset[x]),
            frozenset(s for s in cf.support if y in sout[s]),
        )

    def _belief_step(self, belief, l):
        key = (belief, l)
        r = self._belief.get(key)
        if r is None:
            r = self._belief[key] = frozenset().union(*(self.plant[x][l] for x in belief))
        return r

    def _support_step(self, support, l):
        key = (support, l)
        r = self._step.get(key)
        if r is None:
            delta, rel = self.delta, self.relevant
            src = {}
            for s in support:
                for s2 in delta[s][l]:
                    if s2 in rel:
                        src.setdefault(s2, []).append(s)
            succ = frozenset(src)
            if succ & self.doomed:
                r = None
            else:
                r = (succ, tuple(sorted((s2, self.rej[s2], tuple(ss)) for s2, ss in src.items())))
            self._step[key] = r
        return r

    def step(self, cf: CounterFunction, y: int, u: int) -> Optional[CounterFunction]:
        """Successor position, or None when it is certainly losing."""
        l = y * self.nU + u
        belief = self._belief_step(cf.belief, l)
        if BOTTOM in belief:
            return None
        r = self._support_step(cf.support, l)
        if r is None:
            return None
        support, edges = r
        c = dict(cf.items)
        items = tuple((g2, inc + max(c[g] for g in gs)) for g2, inc, gs in edges)
        return CounterFunction(support, items, belief)


class _SpecStepper:
    """Coarse positions: plant belief plus one counter per specification state.

    The spec states are advanced on every letter any belief state can
    produce, which forgets which plant state a spec state goes with.  Every
    exact run projects onto a tracked one with no smaller count, so a win
    here is a win of the exact game.
    """

    def __init__(self, p: ProductUca):
        if p.source is None:
            raise ValueError("spec grouping needs a product built by build_product")
        sys, spec, letters = p.source
        self.sys, self.spec, self.letters = sys, spec, letters
        n = spec.n_states
        self.rej = [1 if q in spec.rejecting else 0 for q in range(n)]
        preds = [set() for _ in range(n)]
        for q in range(n):
            for succ in spec.delta[q]:
                for q2 in succ:
                    preds[q2].add(q)
        rel = set(spec.rejecting)
        stack = list(rel)
        while stack:
            q = stack.pop()
            for r in preds[q] - rel:
                rel.add(r)
                stack.append(r)
        self.relevant = frozenset(rel)
        # rejecting states every letter keeps inside the set
        doomed = set(spec.rejecting)
        changed = True
        while changed:
            changed = False
            for q in sorted(doomed):
                if not all(succ & doomed for succ in spec.delta[q]):
                    doomed.discard(q)
                    changed = True
        self.doomed = frozenset(doomed)
        self._obs = {}
        self._step = {}

    def initial(self) -> Optional[CounterFunction]:
        init = self.spec.initial
        if init & self.doomed:
            return None
        support = frozenset(init & self.relevant)
        return CounterFunction(support, tuple(sorted((q, self.rej[q]) for q in support)), self.sys.initial)

    def _observe(self, belief, y, u):
        """(successor belief, letter ids) after seeing y and playing u, or None if u is disabled."""
        key = (belief, y, u)
        if key in self._obs:
            return self._obs[key]
        sys = self.sys
        seen = [x for x in belief if y in sys.out[x]]
        nxt, ls = set(), set()
        r = (frozenset(), frozenset())
        for x in seen:
            t = sys.trans[x][u]
            if not t:
                r = None
                break
            nxt |= t
            ls.update(self.letters[x][u])
        else:
            r = (frozenset(nxt), frozenset(ls))
        self._obs[key] = r
        return r

    def outputs(self, cf: CounterFunction) -> list:
        out = self.sys.out
        return sorted({y for x in cf.belief for y in out[x]})

    def observe(self, cf: CounterFunction, y: int) -> tuple:
        out = self.sys.out
        return (frozenset(x for x in cf.belief if y in out[x]),)

    def step(self, cf: CounterFunction, y: int, u: int) -> Optional[CounterFunction]:
        r = self._observe(cf.belief, y, u)
        if r is None:
            return None
        belief, ls = r
        key = (cf.support, ls)
        e = self._step.get(key, False)
        if e is False:
            delta, rel = self.spec.delta, self.relevant
            src = {}
            for q in cf.support:
                for l in ls:
                    for q2 in delta[q][l]:
                        if q2 in rel:
                            src.setdefault(q2, set()).add(q)
            succ = frozenset(src)
            e = None if succ & self.doomed else (succ, tuple(sorted((q2, self.rej[q2], tuple(qs)) for q2, qs in src.items())))
            self._step[key] = e
        if e is None:
            return None
        support, edges = e
        c = dict(cf.items)
        items = tuple((q2, inc + max(c[q] for q in qs)) for q2, inc, qs in edges)
        return CounterFunction(support, items, belief)


def _stepper(p: ProductUca, grouping: str):
    if grouping == "state":
        return _Stepper(p)
    if grouping == "spec":
        return _SpecStepper(p)
    raise ValueError("grouping must be 'state' or 'spec'")


def initial_counter(p: ProductUca, grouping: str = "state") -> CounterFunction:
    return _stepper(p, grouping).initial()


def _maximal_outputs(st, cf, ys):
    """Map each output to a representative whose observation contains its own.

    Successors after y depend only on ``st.observe(cf, y)``; when that is
    contained in the observation of y2, every answer to y2 is also safe
    against y (smaller belief and support, same counts), so y reuses y2's
    row.  Ties go to the lowest id.
    """
    obs = {y: st.observe(cf, y) for y in ys}
    order = sorted(ys, key=lambda y: (-sum(len(c) for c in obs[y]), y))
    kept, rep = [], {}
    for y in order:
        o = obs[y]
        for y2 in kept:
            if all(a <= b for a, b in zip(o, obs[y2])):
                rep[y] = y2
                break
        else:
            kept.append(y)
            rep[y] = y
    return rep


def kcounter_game(
    p: ProductUca,
    k: int,
    antichain: bool = False,
    max_nodes: Optional[int] = None,
    grouping: str = "state",
    merge_outputs: bool = True,
) -> SafetyGame:
    """Build the reachable part of the k-counter safety game.

    With ``antichain`` a new counter function that is pointwise below an
    already discovered one is merged into it.  This is sound (the larger
    node has more runs and higher counts) but may lose winning positions;
    ``synthesize`` therefore rechecks a lost antichain game without merging.
    ``grouping="spec"`` is sound for the same reason and may lose winning
    positions too; ``"state"`` is the exact construction.

    ``merge_outputs`` lets an output whose observation is contained in
    another's share that output's row; the verdict is unchanged because
    winning is monotone in the position.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    st = _stepper(p, grouping)
    nY, nU = p.n_outputs, p.n_inputs
    ids: dict = {}
    env: list = []
    moves: list = []
    queue = deque()

    def intern(cf: Optional[CounterFunction]) -> int:
        if cf is None or any(v > k for _, v in cf.items):
            return UNSAFE
        e = ids.get(cf)
        if e is not None:
            return e
        if antichain:
            for i, other in enumerate(env):
                if cf.leq(other):
                    ids[cf] = i
                    return i
        e = len(env)
        if max_nodes is not None and e >= max_nodes:
            raise GameTooLarge(e)
        ids[cf] = e
        env.append(cf)
        queue.append(e)
        return e

    init_cf = st.initial()
    init = intern(init_cf)
    if init == UNSAFE:
        return SafetyGame(k, (), (), nY, nU, UNSAFE)
    while queue:
        e = queue.popleft()
        cf = env[e]
        row = [DEAD] * nY
        ys = st.outputs(cf)
        rep = _maximal_outputs(st, cf, ys) if merge_outputs else {y: y for y in ys}
        for y in ys:
            if rep[y] == y:
                row[y] = tuple(intern(st.step(cf, y, u)) for u in range(nU))
        for y in ys:
            row[y] = row[rep[y]]
        moves.append(tuple(row))
    return SafetyGame(k, tuple(env), tuple(moves), nY, nU, init)


class GameTooLarge(RuntimeError):
    def __init__(self, n):
        self.n = n
        super().__init__(f"safety game exceeded {n} nodes")


@dataclass(frozen=True)
class SafetySolution:
    winning: bool
    losing_env: frozenset
    permissive: dict  # (env node, y) -> frozenset of safe inputs


def solve_safety(g: SafetyGame) -> SafetySolution:
    """Environment attractor to UNSAFE, computed backwards with move counters."""
    if g.initial == UNSAFE:
        return SafetySolution(False, frozenset(), {})
    preds: dict = {}
    remaining = {}
    for e, row in enumerate(g.moves):
        for y, succ in enumerate(row):
            if succ is DEAD:
                continue
            remaining[(e, y)] = len(succ)
            for t in succ:
                preds.setdefault(t, []).append((e, y))
    losing = set()
    queue = deque([UNSAFE])
    while queue:
        t = queue.popleft()
        for s in preds.get(t, ()):
            remaining[s] -= 1
            if remaining[s] == 0 and s[0] not in losing:
                losing.add(s[0])
                queue.append(s[0])
    permissive = {}
    for e, row in enumerate(g.moves):
        if e in losing:
            continue
        for y, succ in enumerate(row):
            if succ is not DEAD:
                permissive[(e, y)] = frozenset(u for u, t in enumerate(succ) if t != UNSAFE and t not in losing)
    return SafetySolution(g.initial not in losing, frozenset(losing), permissive)


@dataclass(frozen=True)
class MealyController:
    """Deterministic output-feedback controller.

    ``step[z][y]`` is ``None`` (undefined) or ``(u, z')``.
    """

    step: tuple
    initial: int = 0
    input_names: tuple = ()
    output_names: tuple = ()
    k: Optional[int] = None

    @property
    def n_memory(self) -> int:
        return len(self.step)

    def move(self, z: int, y: int):
        return self.step[z][y]

    def as_transition_system(self) -> dict:
        """The machine M: (z, (y, u)) -> {z'}."""
        res = {}
        for z, row in enumerate(self.step):
            for y, mv in enumerate(row):
                if mv is not None:
                    res[(z, (y, mv[0]))] = frozenset([mv[1]])
        return res


@dataclass(frozen=True)
class Unrealizable:
    """No controller was found with counters bounded by ``k_max``."""

    k_max: int

    def __bool__(self):
        return False


def extract_controller(g: SafetyGame, sol: SafetySolution, names=((), ())) -> MealyController:
    """Fix the lowest permissive input everywhere and keep the reachable memory."""
    if not sol.winning:
        raise ValueError("cannot extract a controller from a losing game")
    order = {g.initial: 0}
    queue = deque([g.initial])
    rows = []
    while queue:
        e = queue.popleft()
        row = []
        for y, succ in enumerate(g.moves[e]):
            if succ is DEAD:
                row.append(None)
                continue
            u = min(sol.permissive[(e, y)])
            t = succ[u]
            if t not in order:
                order[t] = len(order)
                queue.append(t)
            row.append((u, order[t]))
        rows.append(tuple(row))
    return MealyController(tuple(rows), 0, tuple(names[0]), tuple(names[1]), g.k)


def default_k_max(p: ProductUca, sys: FiniteSystem) -> int:
    return max(1, len(p.uca.rejecting)) * sys.n_states


def _solve_at(p, k, antichain, max_nodes, grouping):
    g = kcounter_game(p, k, antichain=antichain, max_nodes=max_nodes, grouping=grouping)
    sol = solve_safety(g)
    if antichain and not sol.winning:
        # merged positions may only lose spuriously, so a loss is rechecked exactly
        g = kcounter_game(p, k, max_nodes=max_nodes, grouping=grouping)
        sol = solve_safety(g)
    return g, sol


def synthesize_product(
    p: ProductUca,
    k_max: int,
    antichain: bool = False,
    schedule: str = "gallop",
    max_nodes: Optional[int] = None,
    names=((), ()),
    log=None,
    grouping: str = "state",
):
    """Smallest k <= k_max at which the game is won, with its controller.

    Winning is monotone in k, so the ``gallop`` schedule (0, 1, 3, 7, ...
    then bisection) finds the same k as the ``linear`` schedule 0, 1, ..., k_max.
    """
    if k_max < 0:
        raise ValueError("k_max must be non-negative")
    tried = {}

    def attempt(k):
        if k not in tried:
            tried[k] = _solve_at(p, k, antichain, max_nodes, grouping)
            if log:
                g, sol = tried[k]
                log(f"k={k}: {g.n_env} env nodes, {'won' if sol.winning else 'lost'}")
        return tried[k][1].winning

    if schedule == "linear":
        for k in range(k_max + 1):
            if attempt(k):
                return extract_controller(*tried[k], names)
        return Unrealizable(k_max)
    if schedule != "gallop":
        raise ValueError(f"unknown schedule {schedule!r}")
    lo, hi = -1, None  # lo: largest known losing k
    k = 0
    while True:
        if attempt(k):
            hi = k
            break
        lo = k
        if k >= k_max:
            return Unrealizable(k_max)
        k = min(k_max, 2 * k + 1)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if attempt(mid):
            hi = mid
        else:
            lo = mid
    return extract_controller(*tried[hi], names)


def synthesize(
    sys: FiniteSystem,
    pm: PredicateMaps,
    spec,
    k_max: Optional[int] = None,
    antichain: bool = False,
    schedule: str = "gallop",
    strict: bool = False,
    max_nodes: Optional[int] = None,
    log=None,
    grouping: str = "state",
):
    """Return a MealyController over the system's inputs/outputs, or Unrealizable."""
    p = build_product(sys, pm, spec, strict=strict)
    if k_max is None:
        k_max = default_k_max(p, sys)
    return synthesize_product(
        p, k_max, antichain, schedule, max_nodes, (sys.input_names, sys.output_names), log, grouping
    )


def induced_strategy(m: MealyController):
    """Strategy on external prefixes ``(y0, u0, ..., yk)`` obtained by replaying ``m``."""

    def strategy(prefix):
        prefix = tuple(prefix)
        if len(prefix) % 2 != 1:
            return None
        z = m.initial
        for i in range(0, len(prefix) - 1, 2):
            y, u = prefix[i], prefix[i + 1]
            if not 0 <= y < len(m.step[z]):
                return None
            mv = m.step[z][y]
            if mv is None or mv[0] != u:
                return None
            z = mv[1]
        y = prefix[-1]
        if not 0 <= y < len(m.step[z]):
            return None
        mv = m.step[z][y]
        return None if mv is None else mv[0]

    return strategy
