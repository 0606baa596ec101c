"""HOA v1 import/export for co-Buchi automata.

Spec automata are written over their atomic propositions; letters (mu, lam)
become full cubes.  Automata over abstract alphabets (for instance the
product over outputs x inputs) carry an ``abocs-letters`` header naming each
letter, with the letter index encoded in binary propositions.
"""
from __future__ import annotations

import re
import shlex
from typing import Iterable, Optional

from .automata import NBW, UCW, Uca, complete_uca
from .ltl import spec_alphabet


class HoaError(ValueError):
    """Malformed HOA input."""


class UnsupportedAcceptance(HoaError):
    pass


def _is_spec_alphabet(alphabet) -> bool:
    return all(
        isinstance(l, tuple) and len(l) == 2 and all(isinstance(p, frozenset) for p in l) for l in alphabet
    )


def _quote(s: str) -> str:
    return '"' + str(s).replace("\\", "\\\\").replace('"', '\\"') + '"'


def _letter_name(letter) -> str:
    if isinstance(letter, tuple):
        return ",".join(map(str, letter))
    return str(letter)


def hoa_export(a: Uca, name: str = "abocs", letter_names: Optional[list] = None) -> str:
    """Serialize ``a`` with state-based acceptance; deterministic output."""
    lines = ["HOA: v1", f"name: {_quote(name)}", f"States: {a.n_states}"]
    lines += [f"Start: {q}" for q in sorted(a.initial)]
    if _is_spec_alphabet(a.alphabet) and letter_names is None:
        api = sorted(set().union(*(mu for mu, _ in a.alphabet)))
        apo = sorted(set().union(*(lam for _, lam in a.alphabet)))
        aps = api + apo

        def cube(letter):
            mu, lam = letter
            true = mu | lam
            return "&".join(str(i) if p in true else f"!{i}" for i, p in enumerate(aps)) or "t"

        extra = [f"abocs-inputs: {len(api)}" + "".join(" " + _quote(p) for p in api)]
    else:
        names = letter_names or [_letter_name(l) for l in a.alphabet]
        bits = max(1, (len(a.alphabet) - 1).bit_length())
        aps = [f"l{i}" for i in range(bits)]

        def cube(letter):
            idx = a.letter_id(letter)
            return "&".join(str(i) if idx >> i & 1 else f"!{i}" for i in range(bits))

        extra = [f"abocs-letters: {len(names)}" + "".join(" " + _quote(n) for n in names)]
    lines.append(f"AP: {len(aps)}" + "".join(" " + _quote(p) for p in aps))
    if a.kind == UCW:
        lines += ["acc-name: co-Buchi", "Acceptance: 1 Fin(0)"]
    else:
        lines += ["acc-name: Buchi", "Acceptance: 1 Inf(0)"]
    lines.append("properties: state-acc explicit-labels")
    lines += extra
    lines.append("--BODY--")
    for q in range(a.n_states):
        mark = " {0}" if q in a.rejecting else ""
        lines.append(f"State: {q} {_quote(a.state_names[q])}{mark}")
        for li, letter in enumerate(a.alphabet):
            for s in sorted(a.delta[q][li]):
                lines.append(f"[{cube(letter)}] {s}")
    lines.append("--END--")
    return "\n".join(lines) + "\n"


# -- import ------------------------------------------------------------------

_LABEL_TOK = re.compile(r"\s*(\d+|[tf!&|()])")


def _compile_label(text: str):
    toks = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _LABEL_TOK.match(text, pos)
        if not m:
            raise HoaError(f"bad label expression {text!r}")
        toks.append(m.group(1))
        pos = m.end()
    i = 0

    def peek():
        return toks[i] if i < len(toks) else None

    def take():
        nonlocal i
        i += 1
        return toks[i - 1]

    def disj():
        fs = [conj()]
        while peek() == "|":
            take()
            fs.append(conj())
        return fs[0] if len(fs) == 1 else (lambda v, fs=fs: any(f(v) for f in fs))

    def conj():
        fs = [atom()]
        while peek() == "&":
            take()
            fs.append(atom())
        return fs[0] if len(fs) == 1 else (lambda v, fs=fs: all(f(v) for f in fs))

    def atom():
        tok = take() if peek() is not None else None
        if tok == "!":
            f = atom()
            return lambda v: not f(v)
        if tok == "(":
            f = disj()
            if take() != ")":
                raise HoaError(f"unbalanced label {text!r}")
            return f
        if tok == "t":
            return lambda v: True
        if tok == "f":
            return lambda v: False
        if tok is not None and tok.isdigit():
            k = int(tok)
            return lambda v: k in v
        raise HoaError(f"bad label expression {text!r}")

    f = disj()
    if i != len(toks):
        raise HoaError(f"trailing tokens in label {text!r}")
    return f


def _header_values(rest: str) -> list:
    try:
        return shlex.split(rest, posix=True)
    except ValueError as e:
        raise HoaError(str(e)) from None


def hoa_import(text: str, ap_input: Iterable[str] = None, dualize: bool = False) -> Uca:
    """Parse HOA into a complete UCA.

    ``Fin(0)`` (co-Buchi) maps its marked states to the rejecting set.
    ``Inf(0)`` (Buchi) is accepted only with ``dualize=True``: the automaton
    is taken to recognise the complement of the intended language, and its
    Inf set becomes the rejecting set.
    """
    if "--BODY--" not in text or "--END--" not in text:
        raise HoaError("missing --BODY-- or --END--")
    head, body = text.split("--BODY--", 1)
    body = body.split("--END--", 1)[0]
    header = {}
    starts = []
    for line in head.strip().splitlines():
        if not line.strip():
            continue
        if ":" not in line:
            raise HoaError(f"bad header line {line!r}")
        key, rest = line.split(":", 1)
        key = key.strip()
        if key == "Start":
            if "&" in rest:
                raise HoaError("alternating automata are not supported")
            starts.append(int(rest.strip()))
        else:
            header[key] = rest.strip()
    if header.get("HOA") != "v1":
        raise HoaError("not a HOA v1 document")
    try:
        n_states = int(header.get("States", "0"))
    except ValueError:
        raise HoaError("bad States header") from None
    ap_vals = _header_values(header.get("AP", "0"))
    if not ap_vals or int(ap_vals[0]) != len(ap_vals) - 1:
        raise HoaError("AP count does not match the names")
    aps = ap_vals[1:]
    acc = " ".join(header.get("Acceptance", "").split())
    if acc == "1 Fin(0)":
        mode = "fin"
    elif acc == "1 Inf(0)":
        if not dualize:
            raise UnsupportedAcceptance("Buchi acceptance needs dualize=True")
        mode = "inf"
    elif acc == "0 t":
        mode = "true"
    elif acc == "0 f":
        mode = "false"
    else:
        raise UnsupportedAcceptance(f"unsupported acceptance {acc!r}")

    if "abocs-letters" in header:
        vals = _header_values(header["abocs-letters"])
        alphabet = tuple(vals[1:])
        valuations = [frozenset(i for i in range(len(aps)) if k >> i & 1) for k in range(len(alphabet))]
    else:
        if ap_input is None:
            vals = _header_values(header.get("abocs-inputs", "0"))
            ap_input = vals[1:]
        ap_input = set(ap_input)
        unknown = ap_input - set(aps)
        if unknown:
            raise HoaError(f"input propositions {sorted(unknown)} not in AP")
        alphabet = spec_alphabet(ap_input, [p for p in aps if p not in ap_input])
        pos = {p: i for i, p in enumerate(aps)}
        valuations = [frozenset(pos[p] for p in mu | lam) for mu, lam in alphabet]

    names = [str(q) for q in range(n_states)]
    edges = []  # (src, letter indices, dst, marked)
    state_marks = set()
    cur = None
    for raw in body.strip().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("State:"):
            m = re.match(r'State:\s*(?:\[[^\]]*\]\s*)?(\d+)\s*("(?:[^"\\]|\\.)*")?\s*(\{[\d\s]*\})?\s*$', line)
            if not m:
                raise HoaError(f"bad state line {line!r}")
            cur = int(m.group(1))
            if cur >= n_states:
                raise HoaError(f"state {cur} exceeds States: {n_states}")
            if m.group(2):
                names[cur] = _header_values(m.group(2))[0]
            if m.group(3) and m.group(3).strip("{} "):
                state_marks.add(cur)
            continue
        if cur is None:
            raise HoaError("edge before any State:")
        m = re.match(r"\[([^\]]*)\]\s*(\d+)\s*(\{[\d\s]*\})?\s*$", line)
        if not m:
            raise HoaError(f"unsupported edge {line!r} (implicit labels are not supported)")
        label = _compile_label(m.group(1))
        dst = int(m.group(2))
        if dst >= n_states:
            raise HoaError(f"edge to unknown state {dst}")
        letters = frozenset(i for i, v in enumerate(valuations) if label(v))
        marked = bool(m.group(3) and m.group(3).strip("{} "))
        edges.append((cur, letters, dst, marked))

    trans_marks = any(mk for *_, mk in edges)
    if trans_marks:
        # transition marks: split each state by whether it was entered on a marked edge
        key = {(q, f): i for i, (q, f) in enumerate((q, f) for q in range(n_states) for f in (False, True))}
        delta = [[set() for _ in alphabet] for _ in key]
        for src, letters, dst, mk in edges:
            for f in (False, True):
                for l in letters:
                    delta[key[(src, f)]][l].add(key[(dst, mk)])
        st_names = tuple(f"{names[q]}{'*' if f else ''}" for q, f in key)
        initial = frozenset(key[(q, False)] for q in starts)
        marked = {key[(q, True)] for q in range(n_states)}
    else:
        delta = [[set() for _ in alphabet] for _ in range(n_states)]
        for src, letters, dst, _ in edges:
            for l in letters:
                delta[src][l].add(dst)
        st_names = tuple(names)
        initial = frozenset(starts)
        marked = state_marks
    all_states = frozenset(range(len(st_names)))
    rejecting = {"fin": frozenset(marked), "inf": frozenset(marked), "true": frozenset(), "false": all_states}[mode]
    a = Uca(st_names, initial, alphabet, tuple(tuple(frozenset(s) for s in row) for row in delta), rejecting, UCW)
    return complete_uca(a)
