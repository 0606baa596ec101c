"""Checking the axioms of extended feedback refinement relations.

A relation is a triple (alpha, beta, gamma): alpha maps concrete states to
abstract states, beta maps abstract inputs to concrete inputs and gamma maps
concrete outputs to abstract outputs.  Each map is either a table (tuple
indexed by id) or a callable.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .systems import FiniteSystem, enab_set

SetMap = Union[tuple, Callable]

A1, A2I, A2II, A3 = "A1", "A2.i", "A2.ii", "A3"


def _apply(m: SetMap, v) -> frozenset:
    if callable(m):
        return frozenset(m(v))
    return m[v]


@dataclass(frozen=True)
class EfrrRelation:
    alpha: SetMap
    beta: SetMap
    gamma: SetMap

    def a(self, x) -> frozenset:
        return _apply(self.alpha, x)

    def b(self, u) -> frozenset:
        return _apply(self.beta, u)

    def g(self, y) -> frozenset:
        return _apply(self.gamma, y)

    def inverse(self, n_abstract_states: int, n_abstract_inputs: int, n_abstract_outputs: int) -> "EfrrRelation":
        """Relation in the other direction; needs finite tables."""
        if callable(self.alpha) or callable(self.beta) or callable(self.gamma):
            raise ValueError("only table relations can be inverted")

        def inv(table, n):
            res = [set() for _ in range(n)]
            for v, image in enumerate(table):
                for w in image:
                    res[w].add(v)
            return tuple(frozenset(s) for s in res)

        return EfrrRelation(
            inv(self.alpha, n_abstract_states),
            tuple(frozenset(uh for uh, us in enumerate(self.beta) if u in us) for u in range(_width(self.beta))),
            inv(self.gamma, n_abstract_outputs),
        )

    @classmethod
    def identity(cls, sys: FiniteSystem) -> "EfrrRelation":
        return cls(
            tuple(frozenset([x]) for x in range(sys.n_states)),
            tuple(frozenset([u]) for u in range(sys.n_inputs)),
            tuple(frozenset([y]) for y in range(sys.n_outputs)),
        )


def _width(table) -> int:
    return 1 + max((v for s in table for v in s), default=-1)


def inverse_for(q: EfrrRelation, S: FiniteSystem, Sh: FiniteSystem) -> EfrrRelation:
    """Inverse relation sized by both systems (concrete inputs not in any beta image map to nothing)."""
    inv = q.inverse(Sh.n_states, Sh.n_inputs, Sh.n_outputs)
    beta = tuple(inv.beta[u] if u < len(inv.beta) else frozenset() for u in range(S.n_inputs))
    return EfrrRelation(inv.alpha, beta, inv.gamma)


@dataclass(frozen=True)
class Violation:
    clause: str
    x: Optional[int]
    xh: Optional[int] = None
    uh: Optional[int] = None
    detail: str = ""

    def key(self) -> tuple:
        return (self.clause, self.x, self.xh, self.uh)

    def __str__(self):
        parts = [self.clause, f"x={self.x}"]
        if self.xh is not None:
            parts.append(f"xh={self.xh}")
        if self.uh is not None:
            parts.append(f"uh={self.uh}")
        if self.detail:
            parts.append(self.detail)
        return " ".join(parts)


@dataclass(frozen=True)
class EfrrReport:
    violations: tuple
    direction: str = "abstraction"
    proving: bool = True

    @property
    def passed(self) -> bool:
        return not self.violations

    def clauses(self) -> dict:
        res = {c: True for c in (A1, A2I, A2II, A3)}
        for v in self.violations:
            res[v.clause] = False
        return res

    def to_text(self) -> str:
        head = f"{self.direction}: {'PASS' if self.passed else 'FAIL'}"
        if not self.proving:
            head += " (sampled, non-proving)"
        return "\n".join([head] + [f"  {v}" for v in self.violations]) + "\n"


def check_sound_abstraction(S: FiniteSystem, Sh: FiniteSystem, q: EfrrRelation) -> EfrrReport:
    """Every violated clause of (A1)-(A3), with its (x, xh, uh) witness."""
    out = []
    for x in sorted(S.initial):
        ax = q.a(x)
        if not ax:
            out.append(Violation(A1, x, detail="alpha(x) is empty"))
        elif not ax <= Sh.initial:
            out.append(Violation(A1, x, detail=f"alpha(x) has non-initial {sorted(ax - Sh.initial)}"))
    for x in range(S.n_states):
        ax = q.a(x)
        if not ax:
            continue
        enab_x = enab_set(S, [x])
        gy = frozenset().union(*(q.g(y) for y in S.out[x]))
        for xh in sorted(ax):
            for uh in sorted(enab_set(Sh, [xh])):
                bu = q.b(uh)
                if not bu or not bu <= enab_x:
                    out.append(Violation(A2I, x, xh, uh, f"beta(uh)={sorted(bu)} enabled={sorted(enab_x)}"))
                post = frozenset().union(*(S.trans[x][u] for u in bu))
                img = frozenset().union(*(q.a(x2) for x2 in post))
                target = Sh.trans[xh][uh]
                if not img or not img <= target:
                    out.append(Violation(A2II, x, xh, uh, f"alpha(F(x,beta(uh)))={sorted(img)} not in {sorted(target)}"))
            if not gy or not gy <= Sh.out[xh]:
                out.append(Violation(A3, x, xh, None, f"gamma(H(x))={sorted(gy)} not in {sorted(Sh.out[xh])}"))
    return EfrrReport(tuple(out))


@dataclass(frozen=True)
class RealizationReport:
    forward: EfrrReport
    inverse: EfrrReport

    @property
    def passed(self) -> bool:
        return self.forward.passed and self.inverse.passed

    def to_text(self) -> str:
        return self.forward.to_text() + self.inverse.to_text()


def check_sound_realization(S: FiniteSystem, Sh: FiniteSystem, q: EfrrRelation) -> RealizationReport:
    fwd = check_sound_abstraction(S, Sh, q)
    bwd = check_sound_abstraction(Sh, S, inverse_for(q, S, Sh))
    return RealizationReport(fwd, EfrrReport(bwd.violations, "inverse"))


def check_sampled(cs, ga, samples: int = 10_000, seed: int = 0, tau: Optional[float] = None, cells=None) -> EfrrReport:
    """Falsification of (A2.ii) and (A3) by simulation.

    For each (cell, input) pair draws ``samples`` start points in the cell and
    piecewise-constant disturbances, simulates one sampling period (``tau``
    defaults to the grid's) and checks that every cell containing the end
    point is an abstract successor.  Output samples are checked against
    the cell's abstract outputs.  Passing proves nothing.
    """
    from .abstraction import rk4

    rng = np.random.default_rng(seed)
    grid = ga.grid
    tau = grid.tau if tau is None else tau
    steps = grid.rk_steps
    n = cs.n
    w = np.asarray(cs.w, dtype=float)
    Sh = ga.system
    N = grid.n_cells
    cells = range(N) if cells is None else cells
    out = []
    for x in cells:
        box = grid.cell_box(x)
        lo, hi = np.asarray(box.lo), np.asarray(box.hi)
        pts = lo + rng.random((samples, n)) * (hi - lo)
        corners = rng.random(samples) < 0.1
        pts[corners] = np.where(rng.random((corners.sum(), n)) < 0.5, lo, hi)
        dist = rng.uniform(-1, 1, (steps, samples, n))
        extreme = rng.random(samples) < 0.5
        dist[:, extreme] = np.sign(dist[:, extreme])
        dist = dist * w
        for u in range(len(cs.inputs)):
            uu = np.broadcast_to(cs.input_array(u), (samples, len(cs.inputs[u])))
            with np.errstate(all="ignore"):
                end = rk4(lambda z: cs.f(z, uu), pts, tau, steps, dist)
            bad = ~_contained(ga, end, Sh.trans[x][u])
            if bad.any():
                i = int(np.argmax(bad))
                out.append(Violation(A2II, None, x, u, f"end point {end[i].tolist()} from {pts[i].tolist()}"))
        ys = pts
        if cs.output_mode == "noisy" and cs.eps > 0:
            noise = rng.uniform(-1, 1, (samples, n))
            noise[extreme] = np.sign(noise[extreme])
            ys = pts + noise * cs.eps
        bad = ~_outputs_contained(ga, ys, Sh.out[x])
        if bad.any():
            i = int(np.argmax(bad))
            out.append(Violation(A3, None, x, None, f"output {ys[i].tolist()} of {pts[i].tolist()}"))
    return EfrrReport(tuple(out), "sampled", proving=False)


def _cover_ids(ga, P):
    """For points P (M, n): list over offsets of (ids, valid) arrays for the closed cells containing them."""
    grid = ga.grid
    g0 = np.asarray(grid.lo)
    g1 = np.asarray(grid.hi)
    eta = np.asarray(grid.eta)
    shape = np.asarray(grid.shape)
    with np.errstate(invalid="ignore"):
        t = (P - g0) / eta
        i_lo = np.clip(np.ceil(t) - 1, 0, shape - 1)
        i_hi = np.clip(np.floor(t), 0, shape - 1)
    below = np.any(~(P >= g0), axis=1)  # NaN counts as overflow
    above = np.any(P > g1, axis=1)
    inside = ~(below | above)
    res = []
    n = P.shape[1]
    for off in np.ndindex(*(2,) * n):
        idx = i_lo + np.asarray(off)
        valid = inside & np.all(idx <= i_hi, axis=1)
        # drop an index that does not actually touch the point
        valid &= np.all(g0 + (idx + 1) * eta >= P, axis=1) & np.all(g0 + idx * eta <= P, axis=1)
        ids = np.ravel_multi_index(np.where(valid[:, None], idx, 0).astype(int).T, grid.shape)
        res.append((ids, valid))
    return res, below, above


def _contained(ga, P, allowed: frozenset) -> np.ndarray:
    N = ga.grid.n_cells
    mask = np.zeros(N + 2, dtype=bool)
    mask[list(allowed)] = True
    parts, below, above = _cover_ids(ga, P)
    ok = np.ones(len(P), dtype=bool)
    for ids, valid in parts:
        ok &= ~valid | mask[ids]
    ok &= ~below | mask[N]
    ok &= ~above | mask[N + 1]
    return ok


def _outputs_contained(ga, Y, allowed: frozenset) -> np.ndarray:
    if ga.cs.output_mode == "noisy":
        return _contained(ga, Y, allowed)
    from .abstraction import ABOVE, BELOW

    grid = ga.grid
    ok = np.ones(len(Y), dtype=bool)
    for i, b in enumerate(ga.out_boxes):
        if i in allowed:
            continue
        if b == BELOW:
            hit = np.any(Y < np.asarray(grid.lo), axis=1)
        elif b == ABOVE:
            hit = np.any(Y > np.asarray(grid.hi), axis=1)
        else:
            hit = np.all((Y >= np.asarray(b.lo)) & (Y <= np.asarray(b.hi)), axis=1)
        ok &= ~hit
    return ok
