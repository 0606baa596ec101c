"""Grid abstraction of sampled, disturbed continuous-time control systems.

Cells are closed boxes of a uniform grid over the region of interest, so a
point on a shared face belongs to every touching cell.  Two absorbing
overflow cells collect everything outside the region: ``below`` holds the
points with some coordinate under the lower corner and ``above`` those with
some coordinate over the upper corner.

Concrete outputs are points of the state space.  In ``tiles`` mode the
sensor is exact and the abstract outputs are the tiles of a cover; in
``noisy`` mode the sensor returns any point within ``eps`` (sup-norm) and
the abstract outputs are the cells themselves.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Optional, Sequence

import numpy as np

from .efrr import EfrrRelation
from .systems import FiniteSystem, PredicateMaps

VIOLATION = "violation"
BELOW, ABOVE = "below", "above"


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        if len(self.lo) != len(self.hi) or any(a > b for a, b in zip(self.lo, self.hi)):
            raise ValueError(f"bad box {self.lo} {self.hi}")

    def intersects(self, other: "Box") -> bool:
        return all(a <= d and c <= b for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi))

    def contains(self, p) -> bool:
        return all(a <= v <= b for a, v, b in zip(self.lo, p, self.hi))

    def expand(self, r) -> "Box":
        return Box(tuple(a - r for a in self.lo), tuple(b + r for b in self.hi))


@dataclass(frozen=True)
class ControlSystem:
    """Sampled system xdot = f(x, u) + w with |w_i| <= w_i componentwise.

    ``f`` is vectorized: it maps arrays of shape (..., n) and (..., m) to (..., n).
    ``growth`` is the matrix L of the radius dynamics rdot = L r + w.
    """

    n: int
    f: Callable
    inputs: tuple  # representative input vectors
    w: tuple
    growth: tuple
    input_names: tuple = ()
    initial: Optional[Box] = None
    output_mode: str = "tiles"
    eps: float = 0.0

    def __post_init__(self):
        if not self.inputs:
            raise ValueError("at least one input is required")
        if len(self.w) != self.n or any(v < 0 for v in self.w):
            raise ValueError("disturbance radius must have n non-negative entries")
        L = np.asarray(self.growth, dtype=float)
        if L.shape != (self.n, self.n):
            raise ValueError("growth matrix must be n x n")
        off = L - np.diag(np.diag(L))
        if (off < 0).any():
            raise ValueError("growth matrix needs non-negative off-diagonal entries")
        if self.output_mode not in ("tiles", "noisy"):
            raise ValueError("output_mode must be 'tiles' or 'noisy'")
        if self.eps < 0:
            raise ValueError("eps must be non-negative")
        if not self.input_names:
            object.__setattr__(self, "input_names", tuple(f"u{i}" for i in range(len(self.inputs))))

    def input_array(self, i: int) -> np.ndarray:
        return np.asarray(self.inputs[i], dtype=float)


def rk4(fun, x, t_end: float, steps: int, dist=None):
    """Fixed-step RK4 for xdot = fun(x) (+ dist[k] held constant on step k)."""
    h = t_end / steps
    for k in range(steps):
        d = 0.0 if dist is None else dist[k]
        k1 = fun(x) + d
        k2 = fun(x + 0.5 * h * k1) + d
        k3 = fun(x + 0.5 * h * k2) + d
        k4 = fun(x + h * k3) + d
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def growth_radius(cs: ControlSystem, r0, tau: float, steps: int = 10) -> np.ndarray:
    L = np.asarray(cs.growth, dtype=float)
    w = np.asarray(cs.w, dtype=float)
    return rk4(lambda r: r @ L.T + w, np.asarray(r0, dtype=float), tau, steps)


# relative slack added to reach boxes to absorb floating point rounding
ROUND_SLACK = 1e-9


def reach_overapprox(cs: ControlSystem, cell: Box, u, tau: float, steps: int = 10) -> Optional[Box]:
    """Box containing every tau-successor of ``cell`` under input ``u``; None on divergence."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    lo, hi = np.asarray(cell.lo, float), np.asarray(cell.hi, float)
    c, r = (lo + hi) / 2, (hi - lo) / 2
    if tau == 0:
        return cell
    uu = np.asarray(u, dtype=float)
    with np.errstate(all="ignore"):
        c1 = rk4(lambda x: cs.f(x, uu), c, tau, steps)
        r1 = growth_radius(cs, r, tau, steps)
    if not (np.all(np.isfinite(c1)) and np.all(np.isfinite(r1))):
        return None
    slack = ROUND_SLACK * (1 + np.abs(c1) + r1)
    return Box(tuple(c1 - r1 - slack), tuple(c1 + r1 + slack))


@dataclass(frozen=True)
class GridSpec:
    lo: tuple
    hi: tuple
    eta: tuple
    tau: float
    rk_steps: int = 10
    tiles: tuple = ()  # ((name, Box), ...) for tile outputs

    def __post_init__(self):
        if not (len(self.lo) == len(self.hi) == len(self.eta)):
            raise ValueError("grid bounds and widths must have equal length")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        for a, b, e in zip(self.lo, self.hi, self.eta):
            if not b > a:
                raise ValueError("empty region of interest")
            if e <= 0:
                raise ValueError("cell widths must be positive")
            q = (b - a) / e
            if abs(q - round(q)) > 1e-9 * max(1.0, q):
                raise ValueError(f"grid misaligned: {b} - {a} is not a multiple of {e}")

    @property
    def n(self) -> int:
        return len(self.lo)

    @property
    def shape(self) -> tuple:
        return tuple(int(round((b - a) / e)) for a, b, e in zip(self.lo, self.hi, self.eta))

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    def cell_box(self, idx: int) -> Box:
        mi = np.unravel_index(idx, self.shape)
        lo = tuple(a + i * e for a, i, e in zip(self.lo, mi, self.eta))
        return Box(lo, tuple(v + e for v, e in zip(lo, self.eta)))

    def index_ranges(self, lo, hi):
        """Per-dimension inclusive index ranges of closed cells meeting the box [lo, hi] (clipped)."""
        res = []
        for a, b, g0, e, n in zip(lo, hi, self.lo, self.eta, self.shape):
            i0 = max(0, math.ceil((a - g0) / e) - 1)
            i1 = min(n - 1, math.floor((b - g0) / e))
            if i0 > i1:
                return None
            # ceil(..)-1 can overshoot by one when a sits exactly on a face
            if g0 + (i0 + 1) * e < a:
                i0 += 1
            res.append((i0, i1))
        return res

    def cells_meeting(self, box: Box) -> list:
        rng = self.index_ranges(box.lo, box.hi)
        if rng is None:
            return []
        axes = [range(a, b + 1) for a, b in rng]
        return sorted(int(np.ravel_multi_index(mi, self.shape)) for mi in product(*axes))


def _labels_at(regions, p) -> frozenset:
    return frozenset(name for name, boxes in regions for b in boxes if b.contains(p))


def cell_letters(regions, cell: Box) -> frozenset:
    """Exact set of label sets taken by points of the closed cell.

    Labels are constant between region faces, so evaluating at every face
    coordinate and every midpoint between consecutive faces is exhaustive.
    """
    cand = []
    for d in range(len(cell.lo)):
        lo, hi = cell.lo[d], cell.hi[d]
        pts = {lo, hi}
        for _, boxes in regions:
            for b in boxes:
                for v in (b.lo[d], b.hi[d]):
                    if lo < v < hi:
                        pts.add(v)
        pts = sorted(pts)
        cand.append(pts + [(a + b) / 2 for a, b in zip(pts, pts[1:])])
    return frozenset(_labels_at(regions, p) for p in product(*cand))


@dataclass(frozen=True)
class GriddedAbstraction:
    system: FiniteSystem
    pm: PredicateMaps
    cs: ControlSystem
    grid: GridSpec
    regions: tuple  # ((name, (Box, ...)), ...)
    out_boxes: tuple  # abstract output id -> Box, or BELOW / ABOVE
    relation: EfrrRelation = field(default=None, compare=False)

    @property
    def n_cells(self) -> int:
        return self.grid.n_cells

    def overflow_ids(self) -> tuple:
        return (self.grid.n_cells, self.grid.n_cells + 1)

    def cell_box(self, x: int) -> Box:
        return self.grid.cell_box(x)

    def alpha(self, p) -> frozenset:
        """Cells containing the point p (closed cells; overflow outside the region)."""
        p = tuple(float(v) for v in p)
        g = self.grid
        res = set()
        if any(v < a for v, a in zip(p, g.lo)):
            res.add(g.n_cells)
        if any(v > b for v, b in zip(p, g.hi)):
            res.add(g.n_cells + 1)
        if not res:
            res.update(g.cells_meeting(Box(p, p)))
        return frozenset(res)

    def gamma(self, y) -> frozenset:
        """Abstract outputs containing the concrete output point y."""
        y = tuple(float(v) for v in y)
        if self.cs.output_mode == "noisy":
            return self.alpha(y)
        g = self.grid
        res = set()
        for i, b in enumerate(self.out_boxes):
            if b == BELOW:
                if any(v < a for v, a in zip(y, g.lo)):
                    res.add(i)
            elif b == ABOVE:
                if any(v > c for v, c in zip(y, g.hi)):
                    res.add(i)
            elif b.contains(y):
                res.add(i)
        return frozenset(res)

    def label(self, p) -> frozenset:
        """Concrete output predicate letter of point p."""
        if self.alpha(p) & set(self.overflow_ids()):
            return frozenset([VIOLATION])
        return _labels_at(self.regions, tuple(p))


def _reach_table(cs: ControlSystem, grid: GridSpec, tau: float):
    """Per input: (centers_after (N, n), radius (n,)) for all cells at once."""
    n_cells = grid.n_cells
    shape = grid.shape
    idx = np.array(np.unravel_index(np.arange(n_cells), shape)).T
    lo = np.asarray(grid.lo) + idx * np.asarray(grid.eta)
    centers = lo + np.asarray(grid.eta) / 2
    r0 = np.asarray(grid.eta, dtype=float) / 2
    radius = growth_radius(cs, r0, tau, grid.rk_steps)
    res = []
    for i in range(len(cs.inputs)):
        uu = np.broadcast_to(cs.input_array(i), (n_cells, len(cs.inputs[i])))
        with np.errstate(all="ignore"):
            c1 = rk4(lambda x: cs.f(x, uu), centers, tau, grid.rk_steps)
        res.append(c1)
    return res, radius


def build_abstraction(
    cs: ControlSystem,
    grid: GridSpec,
    regions: Sequence = (),
    input_labels: Optional[dict] = None,
    tau: float = None,
    jobs: int = 1,
) -> GriddedAbstraction:
    """Finite abstraction with overflow cells, lifted outputs and predicate maps.

    ``regions`` is a sequence of ``(name, [Box, ...])``.  ``input_labels``
    maps an input name to the input propositions true for it.
    """
    if grid.n != cs.n:
        raise ValueError("grid dimension does not match the system")
    tau = grid.tau if tau is None else tau
    regions = tuple((name, tuple(bs)) for name, bs in regions)
    if any(name == VIOLATION for name, _ in regions):
        raise ValueError(f"region name {VIOLATION!r} is reserved")
    N = grid.n_cells
    below, above = N, N + 1
    names = [("c" + "_".join(map(str, np.unravel_index(i, grid.shape)))) for i in range(N)] + [BELOW, ABOVE]

    centers, radius = _reach_table(cs, grid, tau)

    def rows(cells):
        res = []
        for x in cells:
            row = []
            for u in range(len(cs.inputs)):
                c1 = centers[u][x]
                if not (np.all(np.isfinite(c1)) and np.all(np.isfinite(radius))):
                    row.append(frozenset([below, above]))
                    continue
                slack = ROUND_SLACK * (1 + np.abs(c1) + radius)
                lo, hi = c1 - radius - slack, c1 + radius + slack
                succ = set(grid.cells_meeting(Box(tuple(lo), tuple(hi))))
                if any(a < g for a, g in zip(lo, grid.lo)):
                    succ.add(below)
                if any(b > g for b, g in zip(hi, grid.hi)):
                    succ.add(above)
                row.append(frozenset(succ))
            res.append(tuple(row))
        return res

    if jobs > 1:
        # chunks are merged in cell order, so the result does not depend on jobs
        chunks = [range(a, min(a + 256, N)) for a in range(0, N, 256)]
        with ThreadPoolExecutor(jobs) as ex:
            trans = [row for part in ex.map(rows, chunks) for row in part]
    else:
        trans = rows(range(N))
    for ov in (below, above):
        trans.append(tuple(frozenset([ov]) for _ in cs.inputs))

    if cs.initial is None:
        initial = frozenset(range(N + 2))
    else:
        if len(cs.initial.lo) != cs.n:
            raise ValueError("initial box has the wrong dimension")
        initial = set(grid.cells_meeting(cs.initial))
        if any(a < g for a, g in zip(cs.initial.lo, grid.lo)):
            initial.add(below)
        if any(b > g for b, g in zip(cs.initial.hi, grid.hi)):
            initial.add(above)
        initial = frozenset(initial)
        if not initial:
            raise ValueError("initial set misses the grid")

    if cs.output_mode == "tiles":
        tiles = list(grid.tiles)
        if not tiles:
            raise ValueError("tiles output mode needs a tile cover")
        _check_cover(grid, [b for _, b in tiles])
        out_names = [name for name, _ in tiles] + [BELOW, ABOVE]
        out_boxes = tuple(b for _, b in tiles) + (BELOW, ABOVE)
        out = []
        for x in range(N):
            cb = grid.cell_box(x)
            out.append(frozenset(i for i, b in enumerate(out_boxes[:-2]) if b.intersects(cb)))
    else:
        out_names = list(names)
        out_boxes = tuple(grid.cell_box(i) for i in range(N)) + (BELOW, ABOVE)
        out = []
        for x in range(N):
            grown = grid.cell_box(x).expand(cs.eps)
            ys = set(grid.cells_meeting(grown))
            # set distance to the closure of the overflow regions
            if any(a <= g for a, g in zip(grown.lo, grid.lo)):
                ys.add(below)
            if any(b >= g for b, g in zip(grown.hi, grid.hi)):
                ys.add(above)
            out.append(frozenset(ys))
    n_out = len(out_names)
    out += [frozenset(range(n_out))] * 2

    fs = FiniteSystem(
        tuple(names), tuple(cs.input_names), tuple(out_names), initial, tuple(trans), tuple(out)
    )
    ap_output = sorted({name for name, _ in regions} | {VIOLATION})
    ap_input = sorted({p for ps in (input_labels or {}).values() for p in ps})
    state_preds = {}
    for x in range(N):
        state_preds[x] = [sorted(l) for l in sorted(cell_letters(regions, grid.cell_box(x)), key=sorted)]
    state_preds[below] = state_preds[above] = [[VIOLATION]]
    input_preds = {}
    for name, ps in (input_labels or {}).items():
        input_preds[cs.input_names.index(name)] = [sorted(ps)]
    pm = PredicateMaps.from_tables(fs, ap_input, ap_output, input_preds, state_preds)
    ga = GriddedAbstraction(fs, pm, cs, grid, regions, out_boxes)
    object.__setattr__(ga, "relation", induced_efrr(ga))
    return ga


def _check_cover(grid: GridSpec, boxes) -> None:
    """Tiles must cover the region of interest (checked on the arrangement of faces)."""
    cand = []
    for d in range(grid.n):
        pts = {grid.lo[d], grid.hi[d]}
        for b in boxes:
            for v in (b.lo[d], b.hi[d]):
                if grid.lo[d] < v < grid.hi[d]:
                    pts.add(v)
        pts = sorted(pts)
        cand.append(pts + [(a + b) / 2 for a, b in zip(pts, pts[1:])])
    for p in product(*cand):
        if not any(b.contains(p) for b in boxes):
            raise ValueError(f"tiles do not cover the point {p}")


def induced_efrr(ga: GriddedAbstraction) -> EfrrRelation:
    """alpha: point -> containing cells; beta: identity on inputs; gamma: point -> containing outputs."""
    m = len(ga.cs.inputs)
    return EfrrRelation(
        alpha=ga.alpha,
        beta=tuple(frozenset([u]) for u in range(m)),
        gamma=ga.gamma,
    )


# -- dynamics library ---------------------------------------------------------


def integrator_chain(dims: int = 1, order: int = 1):
    """``dims`` independent chains of ``order`` integrators; input drives the last link."""
    n = dims * order

    def f(x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        out = np.empty(np.broadcast_shapes(x.shape[:-1], u.shape[:-1]) + (n,))
        for d in range(dims):
            for j in range(order):
                i = d * order + j
                out[..., i] = x[..., i + 1] if j < order - 1 else u[..., d]
        return out

    L = np.zeros((n, n))
    for d in range(dims):
        for j in range(order - 1):
            L[d * order + j, d * order + j + 1] = 1.0
    return f, tuple(map(tuple, L))


def double_integrator():
    return integrator_chain(1, 2)


def dubins(speed: float = 1.0):
    """State (px, py, heading); input (turn rate,)."""

    def f(x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        out = np.empty(np.broadcast_shapes(x.shape[:-1], u.shape[:-1]) + (3,))
        out[..., 0] = speed * np.cos(x[..., 2])
        out[..., 1] = speed * np.sin(x[..., 2])
        out[..., 2] = u[..., 0]
        return out

    s = abs(speed)
    return f, ((0.0, 0.0, s), (0.0, 0.0, s), (0.0, 0.0, 0.0))


def linear(A, B, c=None):
    """xdot = A x + B u + c, with the growth matrix diag(A) and |A| off the diagonal."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    c = np.zeros(A.shape[0]) if c is None else np.asarray(c, dtype=float)

    def f(x, u):
        return np.asarray(x, float) @ A.T + np.asarray(u, float) @ B.T + c

    L = np.abs(A)
    np.fill_diagonal(L, np.diag(A))
    return f, tuple(map(tuple, L))


def piecewise_affine(pieces, default=None):
    """``pieces``: list of (Box, A, B, c); the first box containing x selects the piece.

    Points outside every box use ``default`` (another (A, B, c)) or the last piece.
    """
    mats = [(b, np.asarray(A, float), np.asarray(B, float), np.asarray(c, float)) for b, A, B, c in pieces]
    if default is not None:
        dA, dB, dc = (np.asarray(v, float) for v in default)
    else:
        _, dA, dB, dc = mats[-1]

    def f(x, u):
        x = np.asarray(x, float)
        u = np.asarray(u, float)
        out = x @ dA.T + u @ dB.T + dc
        done = np.zeros(out.shape[:-1], dtype=bool)
        for b, A, B, c in mats:
            inside = np.all((x >= np.asarray(b.lo)) & (x <= np.asarray(b.hi)), axis=-1) & ~done
            if inside.any():
                val = x @ A.T + u @ B.T + c
                out = np.where(inside[..., None], val, out)
                done |= inside
        return out

    allA = [A for _, A, _, _ in mats] + [dA]
    L = np.max([np.abs(A) for A in allA], axis=0)
    np.fill_diagonal(L, np.max([np.diag(A) for A in allA], axis=0))
    return f, tuple(map(tuple, L))
