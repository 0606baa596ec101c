"""``abocs`` command line.

Bundles are directories of text files::

    problem.toml      copy of the problem
    abstraction.sys   finite abstraction with predicate maps
    spec.hoa          compiled specification (strengthened by G !violation
                      for continuous problems)
    controller.ctrl   Mealy controller (after synthesize)
    report.json       realizability report (after synthesize)
    trace.csv/.svg    closed-loop traces (after simulate)

Exit codes: 0 success, 1 check failure, 2 invalid input, 3 unrealizable.
"""
from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
from typing import Optional

import numpy as np

from .abstraction import VIOLATION, build_abstraction
from .automata import lift_alphabet, union
from .efrr import EfrrRelation, check_sound_abstraction, check_sampled, check_sound_realization
from .formats import (
    controller_dot,
    dump_controller,
    dump_relation,
    dump_system,
    load_controller,
    load_relation,
    load_system,
)
from .hoa import HoaError, hoa_export, hoa_import
from .ltl import LtlSyntaxError, UndeclaredAtom, ltl_to_uca, mentioned_atoms, parse_ltl, spec_alphabet
from .problem import Problem, load_problem, loads_problem
from .runtime import RefinedController, finite_trace_csv, simulate_continuous, simulate_finite, trace_csv, trace_svg
from .synthesis import synthesize
from .systems import ValidationError

EXIT_FAIL, EXIT_INPUT, EXIT_UNREALIZABLE = 1, 2, 3


class CliError(Exception):
    def __init__(self, msg, code=EXIT_INPUT):
        super().__init__(msg)
        self.code = code


def _write(path: str, text: str) -> None:
    # newline="" keeps bytes identical across platforms
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _read(path: str) -> str:
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as e:
        raise CliError(str(e)) from None


# ---------------------------------------------------------------- problem -> abstraction


def compile_spec(prob: Problem, ap_input, ap_output):
    """Specification UCA over the problem's alphabet; continuous problems also forbid violation."""
    ap_input, ap_output = sorted(ap_input), sorted(ap_output)
    continuous = prob.kind == "continuous"
    if prob.spec_ltl is not None:
        text = prob.spec_ltl
        if continuous:
            text = f"({text}) & G !{VIOLATION}"
        return ltl_to_uca(parse_ltl(text, ap_input, ap_output), ap_input, ap_output)
    a = hoa_import(prob.spec_hoa, ap_input)
    a = lift_alphabet(a, spec_alphabet(ap_input, ap_output))
    if continuous:
        guard = ltl_to_uca(parse_ltl(f"G !{VIOLATION}", ap_input, ap_output), ap_input, ap_output)
        a = union([a, guard])
    return a


def abstract(prob: Problem, jobs: int = 1):
    """(finite system, predicate maps, gridded abstraction or None)."""
    if prob.kind == "finite":
        return prob.system, prob.pm, None
    ga = build_abstraction(prob.cs, prob.grid, prob.regions, prob.input_labels, jobs=jobs)
    return ga.system, ga.pm, ga


class Bundle:
    def __init__(self, path: str):
        self.path = path

    def file(self, name: str) -> str:
        return os.path.join(self.path, name)

    def has(self, name: str) -> bool:
        return os.path.exists(self.file(name))

    def problem(self) -> Problem:
        # the compiled spec lives in spec.hoa; the original HOA path is not followed
        return loads_problem(_read(self.file("problem.toml")), self.path, read_hoa=False)

    def system(self):
        return load_system(_read(self.file("abstraction.sys")))

    def spec(self):
        return hoa_import(_read(self.file("spec.hoa")))

    def controller(self):
        if not self.has("controller.ctrl"):
            raise CliError(f"{self.path} has no controller; run synthesize first")
        return load_controller(_read(self.file("controller.ctrl")))

    def gridded(self, jobs: int = 1):
        """Rebuild the gridded abstraction and make sure it matches abstraction.sys."""
        prob = self.problem()
        if prob.kind != "continuous":
            return None
        _, _, ga = abstract(prob, jobs)
        if dump_system(ga.system, ga.pm) != _read(self.file("abstraction.sys")):
            raise CliError(f"{self.path}: abstraction.sys is stale; run abstract again")
        return ga


def _default_bundle(problem_path: str) -> str:
    base = os.path.splitext(os.path.basename(problem_path))[0]
    return base + ".bundle"


def _strict(args, prob: Optional[Problem]) -> bool:
    return bool(args.strict_def3 or (prob is not None and prob.synthesis.strict))


def write_bundle(problem_path: str, out: str, jobs: int = 1) -> Bundle:
    prob = load_problem(problem_path)
    S, pm, ga = abstract(prob, jobs)
    spec = compile_spec(prob, pm.ap_input, pm.ap_output)
    os.makedirs(out, exist_ok=True)
    shutil.copyfile(problem_path, os.path.join(out, "problem.toml"))
    _write(os.path.join(out, "abstraction.sys"), dump_system(S, pm))
    _write(os.path.join(out, "spec.hoa"), hoa_export(spec, prob.name))
    # outputs of earlier runs are no longer valid
    for name in ("controller.ctrl", "report.json", "trace.csv", "trace.svg"):
        if os.path.exists(os.path.join(out, name)):
            os.remove(os.path.join(out, name))
    return Bundle(out)


def _bundle_for(path: str, out: Optional[str], jobs: int) -> Bundle:
    if os.path.isdir(path):
        if out and os.path.abspath(out) != os.path.abspath(path):
            raise CliError("-o cannot relocate an existing bundle")
        return Bundle(path)
    return write_bundle(path, out or _default_bundle(path), jobs)


# ---------------------------------------------------------------- policies


def make_policy(name: str, seed: int = 0):
    if name == "lowest":
        return min
    if name == "highest":
        return max
    if name == "random":
        rng = np.random.default_rng(seed)
        return lambda s: sorted(s)[int(rng.integers(len(s)))]
    raise CliError(f"unknown policy {name!r}")


# ---------------------------------------------------------------- commands


def cmd_spec_compile(args) -> int:
    if args.problem:
        prob = load_problem(args.problem)
        if prob.kind == "finite":
            api, apo = prob.pm.ap_input, prob.pm.ap_output
        else:
            api = sorted({p for ps in prob.input_labels.values() for p in ps})
            apo = sorted({name for name, _ in prob.regions} | {VIOLATION})
        a, name = compile_spec(prob, api, apo), prob.name
    else:
        if not args.ltl:
            raise CliError("give a problem file or --ltl")
        api = [s for s in (args.ap_input or "").split(",") if s]
        apo = [s for s in (args.ap_output or "").split(",") if s]
        if args.ap_output is None:
            # undeclared atoms are read as output propositions
            apo = [a for a in mentioned_atoms(args.ltl) if a not in api]
        a, name = ltl_to_uca(parse_ltl(args.ltl, api, apo), api, apo), "spec"
    text = hoa_export(a, name)
    if args.output:
        _write(args.output, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_abstract(args) -> int:
    b = write_bundle(args.problem, args.output or _default_bundle(args.problem), args.jobs)
    S, _ = b.system()
    print(f"abstraction: {S.n_states} states, {S.n_inputs} inputs, {S.n_outputs} outputs -> {b.path}")
    return 0


def cmd_synthesize(args) -> int:
    b = _bundle_for(args.target, args.output, args.jobs)
    prob = b.problem()
    S, pm = b.system()
    spec = b.spec()
    opts = prob.synthesis
    k_max = args.k_max if args.k_max is not None else opts.k_max
    grouping = args.grouping or opts.grouping
    r = synthesize(
        S, pm, spec, k_max=k_max, antichain=opts.antichain, schedule=opts.schedule,
        strict=_strict(args, prob), max_nodes=opts.max_nodes, grouping=grouping,
    )
    report = {
        "problem": prob.name,
        "realizable": bool(r),
        "abstract_states": S.n_states,
        "spec_states": spec.n_states,
        "grouping": grouping,
        "strict": _strict(args, prob),
    }
    if r:
        report.update(k=r.k, memory=r.n_memory)
        _write(b.file("controller.ctrl"), dump_controller(r))
    else:
        report["k_max"] = r.k_max
        if b.has("controller.ctrl"):
            os.remove(b.file("controller.ctrl"))
    _write(b.file("report.json"), json.dumps(report, indent=2, sort_keys=True) + "\n")
    if not r:
        raise CliError(f"unrealizable: no controller with counter bound k <= {r.k_max}", EXIT_UNREALIZABLE)
    print(f"realizable at k={r.k} ({r.n_memory} memory states) -> {b.file('controller.ctrl')}")
    return 0


def cmd_check_efrr(args) -> int:
    if args.pair:
        S, _ = load_system(_read(args.pair[0]))
        Sh, _ = load_system(_read(args.pair[1]))
        q = load_relation(_read(args.pair[2]), S, Sh)
        rep = check_sound_realization(S, Sh, q) if args.realization else check_sound_abstraction(S, Sh, q)
    else:
        if not args.bundle:
            raise CliError("give a bundle or --pair S Sh relation")
        b = Bundle(args.bundle)
        ga = b.gridded(args.jobs)
        if ga is None:
            S, _ = b.system()
            rep = check_sound_abstraction(S, S, EfrrRelation.identity(S))
        else:
            rep = check_sampled(ga.cs, ga, args.samples, args.seed)
    print(rep.to_text(), end="" if rep.to_text().endswith("\n") else "\n")
    return 0 if rep.passed else EXIT_FAIL


def cmd_check_controller(args) -> int:
    from .oracles import model_check

    b = Bundle(args.bundle)
    S, pm = b.system()
    m = b.controller()
    res = model_check(S, pm, b.spec(), m)
    print(json.dumps({"ok": res.ok, "reason": res.reason}, sort_keys=True))
    return 0 if res.ok else EXIT_FAIL


def _simulate(b: Bundle, steps, seed, policy):
    """(csv text, traces or None, gridded abstraction or None, summary dict)."""
    prob = b.problem()
    m = b.controller()
    S, pm = b.system()
    if m.output_names != S.output_names or m.input_names != S.input_names:
        raise CliError("controller names do not match the abstraction")
    steps = steps if steps is not None else prob.simulate.steps
    seed = seed if seed is not None else prob.simulate.seed
    policy = policy or prob.simulate.policy
    if prob.kind == "finite":
        tr = simulate_finite(S, pm, m, steps, seed)[0]
        visits = {}
        for l in tr.letters:
            for a in l:
                visits[a] = visits.get(a, 0) + 1
        return finite_trace_csv(tr, S), None, None, {"steps": steps, "seed": seed, "visits": visits}
    ga = b.gridded()
    pick = make_policy(policy, seed)
    rc = RefinedController(m, ga.relation, gamma_select=pick)
    tr = simulate_continuous(ga, rc, steps, seed)
    visits = {}
    for l in tr.letters:
        for a in l:
            visits[a] = visits.get(a, 0) + 1
    summary = {"steps": steps, "seed": seed, "policy": policy, "visits": visits}
    return trace_csv(tr, ga.cs.input_names), [tr], ga, summary


def cmd_simulate(args) -> int:
    b = Bundle(args.bundle)
    csv, traces, ga, summary = _simulate(b, args.steps, args.seed, args.policy)
    out = args.output or b.path
    os.makedirs(out, exist_ok=True)
    _write(os.path.join(out, "trace.csv"), csv)
    if args.plot:
        if ga is None:
            raise CliError("--plot needs a continuous problem")
        _write(os.path.join(out, "trace.svg"), trace_svg(ga, traces))
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_export(args) -> int:
    b = Bundle(args.bundle)
    fmt = args.format
    if fmt == "hoa":
        text = _read(b.file("spec.hoa"))
    elif fmt == "dot":
        text = controller_dot(b.controller(), b.problem().name)
    elif fmt in ("csv", "svg"):
        csv, traces, ga, _ = _simulate(b, args.steps, args.seed, args.policy)
        if fmt == "csv":
            text = csv
        elif ga is None:
            raise CliError("svg export needs a continuous problem")
        else:
            text = trace_svg(ga, traces)
    elif fmt == "relation":
        prob = b.problem()
        if prob.kind != "finite":
            raise CliError("only finite problems have a table relation")
        S, _ = b.system()
        text = dump_relation(EfrrRelation.identity(S), S, S)
    else:
        raise CliError(f"unknown format {fmt!r}")
    if args.output:
        _write(args.output, text)
    else:
        sys.stdout.write(text)
    return 0


def _verify_one(job):
    from .verify import SUITES

    name, s = job
    return SUITES[name](s)


def cmd_verify(args) -> int:
    from .verify import SUITES

    names = list(SUITES) if args.suite == "all" else [args.suite]
    jobs = [(n, s) for n in names for s in range(args.seed, args.seed + args.count)]
    if args.jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(args.jobs) as ex:
            records = ex.map(_verify_one, jobs, chunksize=4)
            records = list(records)
    else:
        records = map(_verify_one, jobs)
    fails = {n: 0 for n in names}
    for rec in records:
        fails[rec["suite"]] += not rec["ok"]
        print(json.dumps(rec, sort_keys=True), flush=True)
    for n in names:
        print(json.dumps({"suite": n, "summary": True, "count": args.count, "failures": fails[n]}, sort_keys=True))
    return EXIT_FAIL if any(fails.values()) else 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="abocs", description="Abstraction-based output-feedback controller synthesis")
    sub = ap.add_subparsers(dest="cmd", required=True)

    sp = sub.add_parser("spec", help="specification tools")
    spsub = sp.add_subparsers(dest="spec_cmd", required=True)
    c = spsub.add_parser("compile", help="LTL to a co-Buchi HOA automaton")
    c.add_argument("problem", nargs="?")
    c.add_argument("--ltl")
    c.add_argument("--ap-input", help="comma separated input propositions")
    c.add_argument("--ap-output", help="comma separated output propositions")
    c.add_argument("-o", "--output")
    c.set_defaults(fn=cmd_spec_compile)

    a = sub.add_parser("abstract", help="build the finite abstraction bundle")
    a.add_argument("problem")
    a.add_argument("-o", "--output", help="bundle directory (default: <problem>.bundle)")
    a.add_argument("--jobs", type=int, default=1)
    a.set_defaults(fn=cmd_abstract)

    s = sub.add_parser("synthesize", help="bounded synthesis on a problem or bundle")
    s.add_argument("target", help="problem file or bundle directory")
    s.add_argument("-o", "--output")
    s.add_argument("--k-max", type=int)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--grouping", choices=("state", "spec"))
    s.add_argument("--strict-def3", action="store_true", help="output-anchored predicate reading")
    s.set_defaults(fn=cmd_synthesize)

    ch = sub.add_parser("check", help="abstraction and controller checks")
    chsub = ch.add_subparsers(dest="check_cmd", required=True)
    e = chsub.add_parser("efrr", help="eFRR check (exact for finite pairs, sampled for grids)")
    e.add_argument("bundle", nargs="?")
    e.add_argument("--pair", nargs=3, metavar=("S", "SHAT", "RELATION"))
    e.add_argument("--realization", action="store_true")
    e.add_argument("--samples", type=int, default=1000)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--jobs", type=int, default=1)
    e.set_defaults(fn=cmd_check_efrr)
    mc = chsub.add_parser("controller", help="model check the bundle controller on the abstraction")
    mc.add_argument("bundle")
    mc.set_defaults(fn=cmd_check_controller)

    si = sub.add_parser("simulate", help="seeded closed-loop simulation")
    si.add_argument("bundle")
    si.add_argument("--steps", type=int)
    si.add_argument("--seed", type=int)
    si.add_argument("--policy", choices=("lowest", "highest", "random"))
    si.add_argument("--plot", action="store_true", help="also write trace.svg")
    si.add_argument("-o", "--output", help="directory for trace files (default: the bundle)")
    si.set_defaults(fn=cmd_simulate)

    ex = sub.add_parser("export", help="write one artifact to a file or stdout")
    ex.add_argument("bundle")
    ex.add_argument("--format", required=True, choices=("hoa", "dot", "csv", "svg", "relation"))
    ex.add_argument("-o", "--output")
    ex.add_argument("--steps", type=int)
    ex.add_argument("--seed", type=int)
    ex.add_argument("--policy", choices=("lowest", "highest", "random"))
    ex.set_defaults(fn=cmd_export)

    v = sub.add_parser("verify", help="run the seeded oracles; JSON lines on stdout")
    v.add_argument("--suite", default="all", choices=("all", "efrr", "prop3", "soundness", "completeness", "lemma1", "ltl"))
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--count", type=int, default=10)
    v.add_argument("--jobs", type=int, default=1)
    v.set_defaults(fn=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CliError as e:
        print(f"abocs: {e}", file=sys.stderr)
        return e.code
    except (ValidationError, HoaError, LtlSyntaxError, UndeclaredAtom, ValueError) as e:
        print(f"abocs: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
