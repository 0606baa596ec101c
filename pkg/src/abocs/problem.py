"""TOML problem files.

A problem names either a finite plant (``[system]``) or a sampled
continuous plant (``[dynamics]``, ``[inputs]``, ``[disturbance]``,
``[growth]``, ``[initial]``, ``[outputs]``, ``[grid]``, ``[[regions]]``), a
specification (``[spec]`` with ``ltl`` or ``hoa``) and optional
``[synthesis]`` / ``[simulate]`` settings.  Everything is checked before
any computation starts.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from . import abstraction as ab
from .systems import FiniteSystem, PredicateMaps, ValidationError


class ProblemError(ValidationError):
    pass


@dataclass(frozen=True)
class SynthesisOptions:
    k_max: Optional[int] = None
    grouping: str = "state"
    schedule: str = "gallop"
    antichain: bool = False
    strict: bool = False
    max_nodes: Optional[int] = None


@dataclass(frozen=True)
class SimulateOptions:
    steps: int = 100
    seed: int = 0
    policy: str = "lowest"


@dataclass(frozen=True)
class Problem:
    name: str
    kind: str  # "finite" or "continuous"
    spec_ltl: Optional[str]
    spec_hoa: Optional[str]  # HOA text, already read
    synthesis: SynthesisOptions
    simulate: SimulateOptions
    system: Optional[FiniteSystem] = None
    pm: Optional[PredicateMaps] = None
    cs: Optional[ab.ControlSystem] = None
    grid: Optional[ab.GridSpec] = None
    regions: tuple = ()
    input_labels: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, compare=False, repr=False)


_TOP = {
    "problem", "system", "dynamics", "inputs", "disturbance", "growth", "initial", "outputs",
    "grid", "regions", "spec", "synthesis", "simulate",
}
_POLICIES = ("lowest", "highest", "random")


def _keys(where: str, table: dict, allowed, required=()):
    if not isinstance(table, dict):
        raise ProblemError(f"[{where}] must be a table")
    extra = set(table) - set(allowed)
    if extra:
        raise ProblemError(f"[{where}] has unknown keys: {', '.join(sorted(extra))}")
    for k in required:
        if k not in table:
            raise ProblemError(f"[{where}] is missing {k!r}")


def _floats(where, v, n=None) -> tuple:
    if not isinstance(v, list) or not all(isinstance(a, (int, float)) and not isinstance(a, bool) for a in v):
        raise ProblemError(f"{where} must be a list of numbers")
    if n is not None and len(v) != n:
        raise ProblemError(f"{where} must have {n} entries")
    return tuple(float(a) for a in v)


def _box(where, v, n) -> ab.Box:
    if isinstance(v, dict):
        _keys(where, v, ("lo", "hi"), ("lo", "hi"))
        lo, hi = v["lo"], v["hi"]
    elif isinstance(v, list) and len(v) == 2:
        lo, hi = v
    else:
        raise ProblemError(f"{where} must be {{lo, hi}} or [lo, hi]")
    try:
        return ab.Box(_floats(where + ".lo", lo, n), _floats(where + ".hi", hi, n))
    except ValueError as e:
        raise ProblemError(f"{where}: {e}") from None


def _strings(where, v) -> list:
    if not isinstance(v, list) or not all(isinstance(a, str) for a in v):
        raise ProblemError(f"{where} must be a list of strings")
    return list(v)


def _letters(where, v) -> list:
    if not isinstance(v, list) or not all(isinstance(l, list) for l in v):
        raise ProblemError(f"{where} must be a list of letters, e.g. [[\"p\"], []]")
    return [_strings(where, l) for l in v]


def _finite(t: dict):
    _keys(
        "system", t,
        ("states", "initial", "inputs", "outputs", "trans", "out", "ap_input", "ap_output", "state_preds", "input_preds"),
        ("states", "initial", "inputs", "outputs", "trans", "out"),
    )
    trans = {}
    for i, row in enumerate(t["trans"]):
        if not (isinstance(row, list) and len(row) == 3 and isinstance(row[0], str) and isinstance(row[1], str)):
            raise ProblemError(f"system.trans[{i}] must be [state, input, [successors]]")
        trans.setdefault((row[0], row[1]), []).extend(_strings(f"system.trans[{i}]", row[2]))
    if not isinstance(t["out"], dict):
        raise ProblemError("system.out must be a table state -> [outputs]")
    out = {x: _strings(f"system.out.{x}", ys) for x, ys in t["out"].items()}
    sys = FiniteSystem.from_tables(
        _strings("system.states", t["states"]), _strings("system.initial", t["initial"]),
        _strings("system.inputs", t["inputs"]), _strings("system.outputs", t["outputs"]), trans, out,
    )
    sp = {x: _letters(f"system.state_preds.{x}", v) for x, v in t.get("state_preds", {}).items()}
    ip = {u: _letters(f"system.input_preds.{u}", v) for u, v in t.get("input_preds", {}).items()}
    pm = PredicateMaps.from_tables(
        sys, _strings("system.ap_input", t.get("ap_input", [])), _strings("system.ap_output", t.get("ap_output", [])), ip, sp
    )
    return sys, pm


def dynamics_model(t: dict, n: int):
    """(f, growth) for a named model; ``n`` is the declared state dimension."""
    model = t["model"]
    if model == "integrator":
        dims, order = int(t.get("dims", n)), int(t.get("order", 1))
        if dims * order != n:
            raise ProblemError("integrator: dims * order must equal the state dimension")
        return ab.integrator_chain(dims, order)
    if model == "double_integrator":
        if n != 2:
            raise ProblemError("double_integrator has 2 states")
        return ab.double_integrator()
    if model == "dubins":
        if n != 3:
            raise ProblemError("dubins has 3 states")
        return ab.dubins(float(t.get("speed", 1.0)))
    if model == "linear":
        A, B, c = _affine("dynamics", t, n)
        return ab.linear(A, B, c)
    if model == "piecewise_affine":
        pieces = []
        for i, pc in enumerate(t.get("pieces", [])):
            _keys(f"dynamics.pieces[{i}]", pc, ("lo", "hi", "A", "B", "c"), ("lo", "hi", "A", "B"))
            A, B, c = _affine(f"dynamics.pieces[{i}]", pc, n)
            pieces.append((_box(f"dynamics.pieces[{i}]", {"lo": pc["lo"], "hi": pc["hi"]}, n), A, B, c))
        if not pieces:
            raise ProblemError("piecewise_affine needs at least one piece")
        default = None
        if "default" in t:
            _keys("dynamics.default", t["default"], ("A", "B", "c"), ("A", "B"))
            default = _affine("dynamics.default", t["default"], n)
        return ab.piecewise_affine(pieces, default)
    raise ProblemError(f"unknown dynamics model {model!r}")


def _affine(where, t, n):
    if "A" not in t or "B" not in t:
        raise ProblemError(f"{where} needs A and B")
    A, B = np.asarray(t["A"], float), np.asarray(t["B"], float)
    if A.shape != (n, n) or B.ndim != 2 or B.shape[0] != n:
        raise ProblemError(f"{where}: A must be n x n and B n x m")
    c = np.zeros(n) if t.get("c") is None else np.asarray(_floats(f"{where}.c", t["c"], n))
    return A, B, c


def _continuous(raw: dict):
    d, g = raw["dynamics"], raw["grid"]
    _keys("dynamics", d, ("model", "n", "dims", "order", "speed", "A", "B", "c", "pieces", "default"), ("model", "n"))
    n = int(d["n"])
    if n < 1:
        raise ProblemError("dynamics.n must be positive")
    f, L = dynamics_model(d, n)

    if "inputs" not in raw:
        raise ProblemError("missing [inputs]")
    it = raw["inputs"]
    _keys("inputs", it, ("vectors", "names", "labels"), ("vectors",))
    inputs = tuple(_floats(f"inputs.vectors[{i}]", u) for i, u in enumerate(it["vectors"]))
    if len({len(u) for u in inputs}) > 1:
        raise ProblemError("all input vectors need the same length")
    names = tuple(_strings("inputs.names", it.get("names", [])))
    if names and len(names) != len(inputs):
        raise ProblemError("inputs.names must name every input")
    labels = {}
    for u, ps in it.get("labels", {}).items():
        if u not in names:
            raise ProblemError(f"inputs.labels names unknown input {u!r}")
        labels[u] = _strings(f"inputs.labels.{u}", ps)

    dist = raw.get("disturbance", {})
    _keys("disturbance", dist, ("w",))
    w = _floats("disturbance.w", dist["w"], n) if "w" in dist else (0.0,) * n
    if "growth" in raw:
        _keys("growth", raw["growth"], ("L",), ("L",))
        L = tuple(_floats(f"growth.L[{i}]", r, n) for i, r in enumerate(raw["growth"]["L"]))
        if len(L) != n:
            raise ProblemError("growth.L must be n x n")
    initial = None
    if "initial" in raw:
        initial = _box("initial", raw["initial"], n)
    outs = raw.get("outputs", {})
    _keys("outputs", outs, ("mode", "eps", "tiles"))
    try:
        cs = ab.ControlSystem(
            n, f, inputs, w, L, names, initial, outs.get("mode", "tiles"), float(outs.get("eps", 0.0))
        )
    except ValueError as e:
        raise ProblemError(f"dynamics: {e}") from None

    _keys("grid", g, ("lo", "hi", "eta", "tau", "rk_steps"), ("lo", "hi", "eta", "tau"))
    lo, hi, eta = _floats("grid.lo", g["lo"], n), _floats("grid.hi", g["hi"], n), _floats("grid.eta", g["eta"], n)
    tiles = _tiles(outs["tiles"], lo, hi, n) if "tiles" in outs else ()
    try:
        grid = ab.GridSpec(lo, hi, eta, float(g["tau"]), int(g.get("rk_steps", 10)), tiles)
    except ValueError as e:
        raise ProblemError(f"grid: {e}") from None
    if cs.output_mode == "tiles" and not tiles:
        raise ProblemError("tile outputs need outputs.tiles")

    regions = []
    for i, r in enumerate(raw.get("regions", [])):
        _keys(f"regions[{i}]", r, ("name", "boxes"), ("name", "boxes"))
        if r["name"] == ab.VIOLATION:
            raise ProblemError(f"region name {ab.VIOLATION!r} is reserved")
        regions.append((r["name"], tuple(_box(f"regions[{i}].boxes[{j}]", b, n) for j, b in enumerate(r["boxes"]))))
    if len({name for name, _ in regions}) != len(regions):
        raise ProblemError("region names must be distinct")
    return cs, grid, tuple(regions), labels


def _tiles(t, lo, hi, n) -> tuple:
    """Explicit ``[{name, lo, hi}, ...]`` or a regular ``{offset, size}`` cover of the grid."""
    if isinstance(t, list):
        res = []
        for i, e in enumerate(t):
            _keys(f"grid.tiles[{i}]", e, ("name", "lo", "hi"), ("name", "lo", "hi"))
            res.append((e["name"], _box(f"grid.tiles[{i}]", {"lo": e["lo"], "hi": e["hi"]}, n)))
        return tuple(res)
    _keys("grid.tiles", t, ("offset", "size"), ("size",))
    size = _floats("grid.tiles.size", t["size"], n)
    off = _floats("grid.tiles.offset", t.get("offset", [0.0] * n), n)
    if any(s <= 0 for s in size):
        raise ProblemError("tile sizes must be positive")
    axes = []
    for a, b, o, s in zip(lo, hi, off, size):
        # first tile starts at or below the grid's lower face
        start = a + ((o - a) % s) - (s if (o - a) % s > 0 else 0.0)
        starts = []
        v = start
        while v < b:
            starts.append(v)
            v += s
        axes.append(starts)
    res = []
    for k, corner in enumerate(np.array(np.meshgrid(*axes, indexing="ij")).reshape(n, -1).T):
        c = tuple(float(v) for v in corner)
        res.append((f"t{k}", ab.Box(c, tuple(v + s for v, s in zip(c, size)))))
    return tuple(res)


def load_problem(path: str) -> Problem:
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as e:
            raise ProblemError(f"{path}: {e}") from None
    return parse_problem(raw, os.path.dirname(os.path.abspath(path)))


def loads_problem(text: str, base_dir: str = ".", read_hoa: bool = True) -> Problem:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ProblemError(str(e)) from None
    return parse_problem(raw, base_dir, read_hoa)


def parse_problem(raw: dict, base_dir: str = ".", read_hoa: bool = True) -> Problem:
    extra = set(raw) - _TOP
    if extra:
        raise ProblemError(f"unknown sections: {', '.join(sorted(extra))}")
    head = raw.get("problem", {})
    _keys("problem", head, ("name",))
    name = head.get("name", "problem")

    spec = raw.get("spec")
    if spec is None:
        raise ProblemError("missing [spec]")
    _keys("spec", spec, ("ltl", "hoa"))
    if ("ltl" in spec) == ("hoa" in spec):
        raise ProblemError("[spec] needs exactly one of ltl or hoa")
    hoa = None
    if "hoa" in spec and read_hoa:
        p = os.path.join(base_dir, spec["hoa"])
        try:
            with open(p) as fh:
                hoa = fh.read()
        except OSError as e:
            raise ProblemError(f"spec.hoa: {e}") from None

    so = raw.get("synthesis", {})
    _keys("synthesis", so, ("k_max", "grouping", "schedule", "antichain", "strict", "max_nodes"))
    synth = SynthesisOptions(**so)
    if synth.grouping not in ("state", "spec") or synth.schedule not in ("gallop", "linear"):
        raise ProblemError("synthesis.grouping is state|spec and synthesis.schedule is gallop|linear")
    sim = raw.get("simulate", {})
    _keys("simulate", sim, ("steps", "seed", "policy"))
    sim = SimulateOptions(**sim)
    if sim.policy not in _POLICIES:
        raise ProblemError(f"simulate.policy must be one of {', '.join(_POLICIES)}")

    common = dict(name=name, spec_ltl=spec.get("ltl"), spec_hoa=hoa, synthesis=synth, simulate=sim, raw=raw)
    if "system" in raw:
        if "dynamics" in raw or "grid" in raw:
            raise ProblemError("a problem has either [system] or [dynamics]/[grid], not both")
        try:
            sys, pm = _finite(raw["system"])
        except ProblemError:
            raise
        except (ValidationError, ValueError) as e:
            raise ProblemError(f"system: {e}") from None
        return Problem(kind="finite", system=sys, pm=pm, **common)
    if "dynamics" not in raw or "grid" not in raw:
        raise ProblemError("a problem needs [system] or both [dynamics] and [grid]")
    cs, grid, regions, labels = _continuous(raw)
    return Problem(kind="continuous", cs=cs, grid=grid, regions=regions, input_labels=labels, **common)
