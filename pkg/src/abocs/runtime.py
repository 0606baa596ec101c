"""Refining abstract controllers and running closed loops."""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .efrr import EfrrRelation
from .synthesis import MealyController
from .systems import CompositionError, FiniteSystem, PredicateMaps, ValidationError


class UndefinedStrategy(RuntimeError):
    def __init__(self, prefix):
        self.prefix = tuple(prefix)
        super().__init__(f"abstract controller undefined after {self.prefix}")


def lowest(s):
    if not s:
        raise ValidationError("cannot select from an empty set")
    return min(s)


def project_omega(sigma: Sequence, q: EfrrRelation, gamma_select: Callable = lowest, beta_select: Callable = lowest, n_abstract_inputs: Optional[int] = None) -> tuple:
    """One member of the projection of the concrete prefix ``sigma = (y0, u0, ..., yk)``.

    Outputs go through ``gamma_select(gamma(y))``; concrete inputs are mapped
    back to ``beta_select`` of the abstract inputs whose beta image contains them.
    """
    sigma = tuple(sigma)
    if len(sigma) % 2 != 1:
        raise ValidationError("external prefix must start and end with an output")
    if n_abstract_inputs is None:
        if callable(q.beta):
            raise ValueError("n_abstract_inputs is needed for callable beta")
        n_abstract_inputs = len(q.beta)
    res = []
    for i, v in enumerate(sigma):
        if i % 2 == 0:
            res.append(gamma_select(q.g(v)))
        else:
            res.append(beta_select(frozenset(uh for uh in range(n_abstract_inputs) if v in q.b(uh))))
    return tuple(res)


@dataclass
class RefinedController:
    """Concrete controller obtained from an abstract Mealy machine.

    Tracks the abstract memory instead of the full projected prefix; the
    abstract prefix is kept for diagnostics.
    """

    mealy: MealyController
    relation: EfrrRelation
    gamma_select: Callable = lowest
    beta_select: Callable = lowest
    z: int = field(default=None)
    abstract_prefix: list = field(default_factory=list)

    def __post_init__(self):
        if self.z is None:
            self.z = self.mealy.initial

    def reset(self) -> None:
        self.z = self.mealy.initial
        self.abstract_prefix = []

    def advance(self, z: int, y):
        """Pure step: (input, next memory, abstract output, abstract input)."""
        ys = self.relation.g(y)
        if not ys:
            raise ValidationError(f"output {y!r} is outside every abstract output")
        yh = self.gamma_select(ys)
        mv = self.mealy.step[z][yh]
        if mv is None:
            raise UndefinedStrategy(tuple(self.abstract_prefix) + (yh,))
        uh, z2 = mv
        return self.beta_select(self.relation.b(uh)), z2, yh, uh

    def copy(self) -> "RefinedController":
        return RefinedController(
            self.mealy, self.relation, self.gamma_select, self.beta_select, self.z, list(self.abstract_prefix)
        )


def refined_step(rc: RefinedController, y):
    """Project y, advance the memory and return a concrete input."""
    u, z2, yh, uh = rc.advance(rc.z, y)
    rc.abstract_prefix += [yh, uh]
    rc.z = z2
    return u


@dataclass(frozen=True)
class Trace:
    states: tuple
    inputs: tuple
    outputs: tuple
    letters: tuple  # output-predicate letter of each state
    input_letters: tuple = ()

    def __len__(self):
        return len(self.inputs)


def _as_stepper(ctrl):
    """Uniform (memory, y, prefix) -> (u, memory') interface over controller kinds."""
    if isinstance(ctrl, RefinedController):
        def step(mem, y, prefix):
            u, z2, _, _ = ctrl.advance(mem, y)
            return u, z2

        return ctrl.mealy.initial, step
    if isinstance(ctrl, MealyController):
        def step(mem, y, prefix):
            mv = ctrl.step[mem][y]
            if mv is None:
                raise UndefinedStrategy(prefix)
            return mv

        return ctrl.initial, step

    def step(mem, y, prefix):
        u = ctrl(prefix)
        if u is None:
            raise UndefinedStrategy(prefix)
        return u, None

    return None, step


def simulate_finite(
    plant: FiniteSystem,
    pm: PredicateMaps,
    ctrl,
    steps: int,
    seed: int = 0,
    branch_mode: str = "random",
):
    """Closed-loop traces on a finite plant.

    ``all`` branches over successors, outputs and predicate letters and
    returns the set of traces; ``random`` returns a one-element list with a
    seeded trajectory.  Undefined controller moves and disabled inputs raise
    CompositionError with the external prefix.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    mem0, step = _as_stepper(ctrl)

    def move(mem, y, prefix, x_options):
        try:
            u, mem2 = step(mem, y, prefix)
        except UndefinedStrategy:
            raise CompositionError(prefix, "undefined") from None
        if any(not plant.trans[x][u] for x in x_options):
            raise CompositionError(prefix, "not-enabled")
        return u, mem2

    if branch_mode == "random":
        rng = np.random.default_rng(seed)
        pick = lambda s: sorted(s, key=_sort_key)[int(rng.integers(len(s)))]
        x = pick(plant.initial)
        y = pick(plant.out[x])
        prefix = (y,)
        b = frozenset(x2 for x2 in plant.initial if y in plant.out[x2])
        mem = mem0
        xs, us, ys, ls, mus = [x], [], [y], [pick(pm.state_preds[x])], []
        for _ in range(steps):
            u, mem = move(mem, y, prefix, b)
            x = pick(plant.trans[x][u])
            y = pick(plant.out[x])
            b = frozenset(x2 for x2 in plant.post(b, u) if y in plant.out[x2])
            prefix += (u, y)
            xs.append(x)
            us.append(u)
            ys.append(y)
            ls.append(pick(pm.state_preds[x]))
            mus.append(pick(pm.input_preds[u]))
        return [Trace(tuple(xs), tuple(us), tuple(ys), tuple(ls), tuple(mus))]
    if branch_mode != "all":
        raise ValueError(f"unknown branch mode {branch_mode!r}")

    # frontier items: (trace, prefix, belief, memory)
    frontier = []
    for x in sorted(plant.initial):
        for y in sorted(plant.out[x]):
            b = frozenset(x2 for x2 in plant.initial if y in plant.out[x2])
            for lam in sorted(pm.state_preds[x], key=sorted):
                frontier.append((Trace((x,), (), (y,), (lam,), ()), (y,), b, mem0))
    for _ in range(steps):
        nxt = []
        for tr, prefix, b, mem in frontier:
            x, y = tr.states[-1], tr.outputs[-1]
            u, mem2 = move(mem, y, prefix, b)
            for x2 in sorted(plant.trans[x][u]):
                for y2 in sorted(plant.out[x2]):
                    b2 = frozenset(v for v in plant.post(b, u) if y2 in plant.out[v])
                    for mu in sorted(pm.input_preds[u], key=sorted):
                        for lam in sorted(pm.state_preds[x2], key=sorted):
                            t2 = Trace(
                                tr.states + (x2,), tr.inputs + (u,), tr.outputs + (y2,),
                                tr.letters + (lam,), tr.input_letters + (mu,),
                            )
                            nxt.append((t2, prefix + (u, y2), b2, mem2))
        frontier = nxt
    return {t for t, *_ in frontier}


def _sort_key(v):
    return sorted(v) if isinstance(v, frozenset) else v


@dataclass(frozen=True)
class ContinuousTrace:
    times: np.ndarray
    states: np.ndarray  # (steps+1, n)
    inputs: np.ndarray  # (steps, m) input vectors
    input_ids: tuple
    outputs: np.ndarray  # (steps+1, n) output points
    letters: tuple  # predicate letter (frozenset) of each state


def simulate_continuous(ga, rc: RefinedController, steps: int, seed: int = 0, x0=None) -> ContinuousTrace:
    """Seeded closed loop of the sampled plant under a refined controller.

    Disturbances are piecewise constant on the RK4 sub-steps; noisy outputs
    are drawn uniformly from the eps-box around the state.
    """
    from .abstraction import rk4

    if steps < 1:
        raise ValueError("steps must be at least 1")
    cs, grid = ga.cs, ga.grid
    rng = np.random.default_rng(seed)
    n = cs.n
    if x0 is None:
        if cs.initial is None:
            raise ValueError("an initial point is needed when the initial set is unrestricted")
        lo, hi = np.asarray(cs.initial.lo), np.asarray(cs.initial.hi)
        x = lo + rng.random(n) * (hi - lo)
    else:
        x = np.asarray(x0, dtype=float)
    w = np.asarray(cs.w, dtype=float)
    rc.reset()
    xs, us, uids, ys, ls = [x.copy()], [], [], [], [ga.label(x)]
    for _ in range(steps):
        y = x.copy()
        if cs.output_mode == "noisy" and cs.eps > 0:
            y = x + rng.uniform(-cs.eps, cs.eps, n)
        ys.append(y)
        u = refined_step(rc, tuple(y))
        uu = cs.input_array(u)
        dist = rng.uniform(-1, 1, (grid.rk_steps, n)) * w
        x = rk4(lambda z: cs.f(z, uu), x, grid.tau, grid.rk_steps, dist)
        uids.append(u)
        us.append(uu)
        xs.append(x.copy())
        ls.append(ga.label(x))
    y = x.copy()
    if cs.output_mode == "noisy" and cs.eps > 0:
        y = x + rng.uniform(-cs.eps, cs.eps, n)
    ys.append(y)
    times = np.arange(steps + 1) * grid.tau
    return ContinuousTrace(times, np.array(xs), np.array(us), tuple(uids), np.array(ys), tuple(ls))


def simulate_closed_loop(plant, ctrl, steps: int, seed: int = 0, branch_mode: str = "random", pm=None, x0=None):
    """Dispatch on the plant kind: a FiniteSystem (needs ``pm``) or a GriddedAbstraction."""
    if isinstance(plant, FiniteSystem):
        if pm is None:
            raise ValueError("finite plants need predicate maps")
        return simulate_finite(plant, pm, ctrl, steps, seed, branch_mode)
    if branch_mode != "random":
        raise ValueError("continuous plants only support random branching")
    return [simulate_continuous(plant, ctrl, steps, seed, x0)]


# -- export ---------------------------------------------------------------------


def _fmt(v: float) -> str:
    return f"{float(v):.6g}"


def trace_csv(tr: ContinuousTrace, input_names: Sequence = ()) -> str:
    n = tr.states.shape[1]
    m = tr.inputs.shape[1] if len(tr.inputs) else 0
    buf = io.StringIO()
    head = ["t"] + [f"x{i}" for i in range(n)] + [f"u{i}" for i in range(m)] + ["u_name"]
    head += [f"y{i}" for i in range(n)] + ["predicates"]
    buf.write(",".join(head) + "\n")
    for k in range(len(tr.times)):
        row = [_fmt(tr.times[k])] + [_fmt(v) for v in tr.states[k]]
        if k < len(tr.inputs):
            uid = tr.input_ids[k]
            row += [_fmt(v) for v in tr.inputs[k]] + [str(input_names[uid]) if input_names else str(uid)]
        else:
            row += [""] * m + [""]
        row += [_fmt(v) for v in tr.outputs[k]]
        row.append(" ".join(sorted(tr.letters[k])))
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def finite_trace_csv(tr: Trace, sys: FiniteSystem) -> str:
    buf = io.StringIO()
    buf.write("t,x,u,y,predicates\n")
    for k in range(len(tr.states)):
        u = sys.input_names[tr.inputs[k]] if k < len(tr.inputs) else ""
        buf.write(f"{k},{sys.state_names[tr.states[k]]},{u},{sys.output_names[tr.outputs[k]]},{' '.join(sorted(tr.letters[k]))}\n")
    return buf.getvalue()


_PALETTE = ("#4daf4a", "#377eb8", "#e41a1c", "#984ea3", "#ff7f00", "#a65628", "#f781bf")


def trace_svg(ga, traces: Sequence[ContinuousTrace], dims=(0, 1), size: int = 480, show_tiles: bool = True) -> str:
    """Deterministic SVG: grid, tiles, labelled regions and trajectories projected on ``dims``."""
    g = ga.grid
    if g.n == 1:
        return _trace_svg_1d(ga, traces, size)
    i, j = dims
    x0, x1, y0, y1 = g.lo[i], g.hi[i], g.lo[j], g.hi[j]
    pad = 20
    sx = (size - 2 * pad) / (x1 - x0)
    sy = (size - 2 * pad) / (y1 - y0)
    X = lambda v: pad + (v - x0) * sx
    Y = lambda v: size - pad - (v - y0) * sy
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="white"/>',
    ]
    for k in range(g.shape[i] + 1):
        v = X(x0 + k * g.eta[i])
        out.append(f'<line x1="{v:.2f}" y1="{Y(y0):.2f}" x2="{v:.2f}" y2="{Y(y1):.2f}" stroke="#dddddd" stroke-width="0.5"/>')
    for k in range(g.shape[j] + 1):
        v = Y(y0 + k * g.eta[j])
        out.append(f'<line x1="{X(x0):.2f}" y1="{v:.2f}" x2="{X(x1):.2f}" y2="{v:.2f}" stroke="#dddddd" stroke-width="0.5"/>')
    if show_tiles and ga.cs.output_mode == "tiles":
        for name, b in g.tiles:
            out.append(
                f'<rect x="{X(b.lo[i]):.2f}" y="{Y(b.hi[j]):.2f}" width="{(b.hi[i] - b.lo[i]) * sx:.2f}" '
                f'height="{(b.hi[j] - b.lo[j]) * sy:.2f}" fill="none" stroke="#999999" stroke-dasharray="3,2" stroke-width="0.8"/>'
            )
    for c, (name, boxes) in enumerate(ga.regions):
        col = _PALETTE[c % len(_PALETTE)]
        for b in boxes:
            out.append(
                f'<rect x="{X(b.lo[i]):.2f}" y="{Y(b.hi[j]):.2f}" width="{(b.hi[i] - b.lo[i]) * sx:.2f}" '
                f'height="{(b.hi[j] - b.lo[j]) * sy:.2f}" fill="{col}" fill-opacity="0.35" stroke="{col}"/>'
            )
        b = boxes[0]
        out.append(f'<text x="{X(b.lo[i]) + 2:.2f}" y="{Y(b.hi[j]) + 12:.2f}" font-size="11" font-family="sans-serif">{name}</text>')
    out.append(f'<rect x="{X(x0):.2f}" y="{Y(y1):.2f}" width="{(x1 - x0) * sx:.2f}" height="{(y1 - y0) * sy:.2f}" fill="none" stroke="black"/>')
    for tr in traces:
        pts = " ".join(f"{X(p[i]):.2f},{Y(p[j]):.2f}" for p in tr.states)
        out.append(f'<polyline points="{pts}" fill="none" stroke="black" stroke-width="1"/>')
        p = tr.states[0]
        out.append(f'<circle cx="{X(p[i]):.2f}" cy="{Y(p[j]):.2f}" r="3" fill="black"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _trace_svg_1d(ga, traces, size: int) -> str:
    """Position against time; regions become vertical bands."""
    g = ga.grid
    x0, x1 = g.lo[0], g.hi[0]
    t1 = max([float(tr.times[-1]) for tr in traces] + [g.tau])
    pad = 20
    sx = (size - 2 * pad) / (x1 - x0)
    st = (size - 2 * pad) / t1
    X = lambda v: pad + (v - x0) * sx
    T = lambda t: size - pad - t * st
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="white"/>',
    ]
    for k in range(g.shape[0] + 1):
        v = X(x0 + k * g.eta[0])
        out.append(f'<line x1="{v:.2f}" y1="{T(t1):.2f}" x2="{v:.2f}" y2="{T(0):.2f}" stroke="#dddddd" stroke-width="0.5"/>')
    for c, (name, boxes) in enumerate(ga.regions):
        col = _PALETTE[c % len(_PALETTE)]
        for b in boxes:
            out.append(
                f'<rect x="{X(b.lo[0]):.2f}" y="{T(t1):.2f}" width="{(b.hi[0] - b.lo[0]) * sx:.2f}" '
                f'height="{t1 * st:.2f}" fill="{col}" fill-opacity="0.35" stroke="{col}"/>'
            )
        out.append(f'<text x="{X(boxes[0].lo[0]) + 2:.2f}" y="{T(t1) + 12:.2f}" font-size="11" font-family="sans-serif">{name}</text>')
    out.append(f'<rect x="{X(x0):.2f}" y="{T(t1):.2f}" width="{(x1 - x0) * sx:.2f}" height="{t1 * st:.2f}" fill="none" stroke="black"/>')
    for tr in traces:
        pts = " ".join(f"{X(p[0]):.2f},{T(float(t)):.2f}" for p, t in zip(tr.states, tr.times))
        out.append(f'<polyline points="{pts}" fill="none" stroke="black" stroke-width="1"/>')
        out.append(f'<circle cx="{X(tr.states[0][0]):.2f}" cy="{T(0):.2f}" r="3" fill="black"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
