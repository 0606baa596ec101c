"""Structured-text files for systems, controllers and relations.

All formats are line based with ``[section]`` headers.  Names are single
tokens (no whitespace, braces or ``->``); ``#`` starts a comment.  Writers
sort by id so equal objects serialize to identical bytes.
"""
from __future__ import annotations

import re
from typing import Optional

from .efrr import EfrrRelation
from .synthesis import MealyController
from .systems import FiniteSystem, PredicateMaps, ValidationError

_TOKEN = re.compile(r"^[^\s{}#,]+$")


class FormatError(ValidationError):
    def __init__(self, msg, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line else msg)


def _check_name(n: str) -> str:
    if not _TOKEN.match(n) or n == "->":
        raise FormatError(f"name {n!r} is not a single token")
    return n


def _sections(text: str) -> dict:
    out: dict = {}
    cur = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"\[([\w.]+)\]", line)
        if m:
            cur = m.group(1)
            if cur in out:
                raise FormatError(f"duplicate section [{cur}]", no)
            out[cur] = []
        elif cur is None:
            raise FormatError("content before the first section", no)
        else:
            out[cur].append((no, line))
    return out


def _arrow(no, line):
    if "->" not in line:
        raise FormatError("expected 'lhs -> rhs'", no)
    lhs, rhs = line.split("->", 1)
    return lhs.split(), rhs


def _fmt_letter(l) -> str:
    return "{" + ",".join(sorted(l)) + "}"


def _parse_letters(no, text) -> frozenset:
    found = re.findall(r"\{([^}]*)\}", text)
    if not found or re.sub(r"\{[^}]*\}", "", text).strip():
        raise FormatError("expected letters like {p,q} {}", no)
    return frozenset(frozenset(a.strip() for a in f.split(",") if a.strip()) for f in found)


# ---------------------------------------------------------------- systems


def dump_system(sys: FiniteSystem, pm: Optional[PredicateMaps] = None) -> str:
    S, U, Y = sys.state_names, sys.input_names, sys.output_names
    for n in S + U + Y:
        _check_name(n)
    lines = ["[states]", *S, "[initial]", *(S[x] for x in sorted(sys.initial))]
    lines += ["[inputs]", *U, "[outputs]", *Y, "[trans]"]
    for x in range(sys.n_states):
        for u in range(sys.n_inputs):
            succ = sys.trans[x][u]
            if succ:
                lines.append(f"{S[x]} {U[u]} -> " + " ".join(S[s] for s in sorted(succ)))
    lines.append("[out]")
    lines += [f"{S[x]} -> " + " ".join(Y[y] for y in sorted(sys.out[x])) for x in range(sys.n_states)]
    if pm is not None:
        lines += ["[aps]", "input " + " ".join(pm.ap_input), "output " + " ".join(pm.ap_output)]
        lines.append("[preds.state]")
        for x in range(sys.n_states):
            lines.append(f"{S[x]} -> " + " ".join(_fmt_letter(l) for l in sorted(pm.state_preds[x], key=sorted)))
        lines.append("[preds.input]")
        for u in range(sys.n_inputs):
            lines.append(f"{U[u]} -> " + " ".join(_fmt_letter(l) for l in sorted(pm.input_preds[u], key=sorted)))
    return "\n".join(l.rstrip() for l in lines) + "\n"


def load_system(text: str):
    """Parse a system file; returns (FiniteSystem, PredicateMaps or None)."""
    sec = _sections(text)
    for need in ("states", "inputs", "outputs", "out"):
        if need not in sec:
            raise FormatError(f"missing section [{need}]")

    def names(key):
        res = []
        for no, line in sec.get(key, []):
            for tok in line.split():
                try:
                    res.append(_check_name(tok))
                except FormatError as e:
                    raise FormatError(str(e), no) from None
        return res

    states, inputs, outputs = names("states"), names("inputs"), names("outputs")
    trans = {}
    for no, line in sec.get("trans", []):
        lhs, rhs = _arrow(no, line)
        if len(lhs) != 2:
            raise FormatError("expected 'state input -> states'", no)
        trans.setdefault(tuple(lhs), []).extend(rhs.split())
    out = {}
    for no, line in sec["out"]:
        lhs, rhs = _arrow(no, line)
        if len(lhs) != 1:
            raise FormatError("expected 'state -> outputs'", no)
        out.setdefault(lhs[0], []).extend(rhs.split())
    sys = FiniteSystem.from_tables(states, names("initial"), inputs, outputs, trans, out)
    if "aps" not in sec:
        return sys, None
    api, apo = [], []
    for no, line in sec["aps"]:
        head, *rest = line.split()
        if head == "input":
            api += rest
        elif head == "output":
            apo += rest
        else:
            raise FormatError("expected 'input ...' or 'output ...'", no)

    def preds(key):
        res = {}
        for no, line in sec.get(key, []):
            lhs, rhs = _arrow(no, line)
            if len(lhs) != 1:
                raise FormatError("expected 'name -> letters'", no)
            res[lhs[0]] = _parse_letters(no, rhs)
        return res

    pm = PredicateMaps.from_tables(sys, api, apo, preds("preds.input"), preds("preds.state"))
    return sys, pm


# ---------------------------------------------------------------- controllers


def dump_controller(m: MealyController) -> str:
    U, Y = m.input_names, m.output_names
    if not U or not Y:
        raise FormatError("controller needs input and output names to be written")
    lines = ["[controller]", f"memory {m.n_memory}", f"initial {m.initial}"]
    if m.k is not None:
        lines.append(f"k {m.k}")
    lines += ["inputs " + " ".join(U), "outputs " + " ".join(Y), "[step]"]
    for z, row in enumerate(m.step):
        for y, mv in enumerate(row):
            if mv is not None:
                lines.append(f"{z} {Y[y]} -> {U[mv[0]]} {mv[1]}")
    return "\n".join(lines) + "\n"


def load_controller(text: str) -> MealyController:
    sec = _sections(text)
    if "controller" not in sec or "step" not in sec:
        raise FormatError("controller files need [controller] and [step]")
    head = {}
    for no, line in sec["controller"]:
        key, *rest = line.split()
        head[key] = (no, rest)
    try:
        n = int(head["memory"][1][0])
        init = int(head.get("initial", (0, ["0"]))[1][0])
        k = int(head["k"][1][0]) if "k" in head else None
        U, Y = tuple(head["inputs"][1]), tuple(head["outputs"][1])
    except (KeyError, IndexError, ValueError):
        raise FormatError("[controller] needs memory, inputs and outputs") from None
    ui = {u: i for i, u in enumerate(U)}
    yi = {y: i for i, y in enumerate(Y)}
    rows = [[None] * len(Y) for _ in range(n)]
    for no, line in sec["step"]:
        lhs, rhs = _arrow(no, line)
        rhs = rhs.split()
        try:
            z, y = int(lhs[0]), yi[lhs[1]]
            u, z2 = ui[rhs[0]], int(rhs[1])
        except (IndexError, KeyError, ValueError):
            raise FormatError("expected 'memory output -> input memory'", no) from None
        if not (0 <= z < n and 0 <= z2 < n):
            raise FormatError("memory state out of range", no)
        if rows[z][y] is not None:
            raise FormatError("duplicate step entry", no)
        rows[z][y] = (u, z2)
    if not 0 <= init < n:
        raise FormatError("initial memory out of range")
    return MealyController(tuple(map(tuple, rows)), init, U, Y, k)


def controller_dot(m: MealyController, name: str = "controller") -> str:
    """Mealy machine as a DOT digraph; edges labelled ``output / input``."""
    U, Y = m.input_names, m.output_names
    lines = [f'digraph "{name}" {{', "  rankdir=LR;", '  init [shape=point, label=""];']
    for z in range(m.n_memory):
        lines.append(f'  m{z} [shape=circle, label="{z}"];')
    lines.append(f"  init -> m{m.initial};")
    for z, row in enumerate(m.step):
        edges: dict = {}
        for y, mv in enumerate(row):
            if mv is not None:
                yn = Y[y] if Y else str(y)
                un = U[mv[0]] if U else str(mv[0])
                edges.setdefault(mv[1], []).append(f"{yn} / {un}")
        for z2, labels in sorted(edges.items()):
            label = "\\n".join(labels).replace('"', '\\"')
            lines.append(f'  m{z} -> m{z2} [label="{label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- relations


def dump_relation(q: EfrrRelation, S: FiniteSystem, Sh: FiniteSystem) -> str:
    """Finite (table) relations only."""
    if callable(q.alpha) or callable(q.beta) or callable(q.gamma):
        raise FormatError("only table relations can be written")
    lines = ["[alpha]"]
    for x, img in enumerate(q.alpha):
        lines.append(f"{S.state_names[x]} -> " + " ".join(Sh.state_names[v] for v in sorted(img)))
    lines.append("[beta]")
    for uh, img in enumerate(q.beta):
        lines.append(f"{Sh.input_names[uh]} -> " + " ".join(S.input_names[v] for v in sorted(img)))
    lines.append("[gamma]")
    for y, img in enumerate(q.gamma):
        lines.append(f"{S.output_names[y]} -> " + " ".join(Sh.output_names[v] for v in sorted(img)))
    return "\n".join(l.rstrip() for l in lines) + "\n"


def load_relation(text: str, S: FiniteSystem, Sh: FiniteSystem) -> EfrrRelation:
    sec = _sections(text)

    def table(key, dom, cod, n):
        rows = [frozenset()] * n
        for no, line in sec.get(key, []):
            lhs, rhs = _arrow(no, line)
            try:
                rows[dom(lhs[0])] = frozenset(cod(v) for v in rhs.split())
            except (ValidationError, IndexError) as e:
                raise FormatError(str(e), no) from None
        return tuple(rows)

    return EfrrRelation(
        table("alpha", S.state_id, Sh.state_id, S.n_states),
        table("beta", Sh.input_id, S.input_id, Sh.n_inputs),
        table("gamma", S.output_id, Sh.output_id, S.n_outputs),
    )
