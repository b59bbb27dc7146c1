"""Command-line front end: ``semiodesign <command> ...``.

Exit codes: 0 success, 1 checked property fails, 2 parse/validation/usage
error, 3 internal or I/O failure mid-run.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import defaultdict

from .errors import Diagnostic, EngineError
from .lifecycle_sim import cluster_agents, interaction_trend, read_jsonl, run
from .lifecycle_sim.trace import DEFAULT_TREND_WINDOW, SUCCESSFUL, dumps_jsonl, dumps_summary
from .morphism import validate_morphism
from .semiosis import check_laws
from .sgn_dsl import load_file

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_INTERNAL = 0, 1, 2, 3


def _emit(args, payload: dict, lines) -> None:
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    else:
        for line in lines:
            print(line)


def _report(diags, args) -> None:
    for d in diags:
        print(str(d), file=sys.stderr)


def _load(path, args):
    sf = load_file(path)
    if sf.diagnostics:
        _report(sf.diagnostics, args)
        return sf, False
    return sf, True


def _fail(args, code: int, message: str, diag_code: str = "ERROR") -> int:
    print(str(Diagnostic(diag_code, message)), file=sys.stderr)
    if args.json:
        print(json.dumps({"ok": False, "error": {"code": diag_code, "message": message}},
                         sort_keys=True))
    return code


def _morphism_diagnostics(sf) -> list[Diagnostic]:
    out = []
    for m in sf.namespace["morphism"].values():
        for d in validate_morphism(m).diagnostics:
            out.append(Diagnostic(d.code, f"morphism {m.name}: {d.message}").at(m.loc).in_file(sf.path))
    return out


def cmd_validate(args) -> int:
    diags = []
    for path in args.files:
        sf = load_file(path)
        diags += sf.diagnostics
        if not sf.diagnostics:
            diags += _morphism_diagnostics(sf)
    _report(diags, args)
    if args.json:
        print(json.dumps({"ok": not diags, "diagnostics": [d.to_dict() for d in diags]},
                         sort_keys=True))
    return EXIT_INVALID if diags else EXIT_OK


def cmd_morph_check(args) -> int:
    sf, ok = _load(args.file, args)
    if not ok:
        return EXIT_INVALID
    m = sf.get("morphism", args.morphism)
    if m is None:
        return _fail(args, EXIT_INVALID, f"unknown morphism {args.morphism!r}", "UNKNOWN_MORPHISM")
    rep = validate_morphism(m)
    _report(rep.diagnostics, args)
    _emit(args, {
        "morphism": m.name, "source": m.source.name, "target": m.target.name,
        "valid": rep.valid, "isomorphism": rep.is_isomorphism,
        "level_preserving": rep.is_level_preserving,
        "diagnostics": [d.to_dict() for d in rep.diagnostics],
    }, [
        f"morphism {m.name}: {m.source.name} -> {m.target.name}",
        f"  valid: {rep.valid}",
        f"  isomorphism: {rep.is_isomorphism}",
        f"  level-preserving: {rep.is_level_preserving}",
    ])
    return EXIT_OK if rep.valid else EXIT_FAIL


def cmd_laws(args) -> int:
    sf, ok = _load(args.file, args)
    if not ok:
        return EXIT_INVALID
    seq = sf.get("sequence", args.sequence)
    if seq is None:
        return _fail(args, EXIT_INVALID, f"unknown sequence {args.sequence!r}", "UNKNOWN_SEQUENCE")
    configs = None
    if args.config:
        cfg = sf.get("config", args.config)
        if cfg is None:
            return _fail(args, EXIT_INVALID, f"unknown configuration {args.config!r}", "UNKNOWN_CONFIG")
        if cfg.system != seq.components[0].source_system:
            return _fail(args, EXIT_INVALID, f"configuration {cfg.name} is not over "
                         f"{seq.components[0].source_system.name}", "SYSTEM_MISMATCH")
        configs = [cfg] + [None] * (len(seq.components) - 1)
    rep = check_laws(seq, configs, args.seed)
    lines = [
        f"sequence {seq.name}",
        f"  law I: {'holds' if rep.law1_holds else 'fails'}"
        f" (well-defined component: {_fmt(rep.well_defined_witness)},"
        f" non-level-preserving branch: {_fmt(rep.level_break_witness)})",
        f"  law II: {'holds' if rep.law2_holds else 'fails'}",
    ]
    for v in rep.law2_verdicts:
        lines.append(f"    component {v.component} branch {v.branch}: "
                     f"epsilon {v.epsilon_before} -> {v.epsilon_after} "
                     f"{'natural' if v.natural else 'not natural'}")
    payload = rep.to_dict()
    payload.update(sequence=seq.name, law2_holds=rep.law2_holds)
    _emit(args, payload, lines)
    return EXIT_OK if rep.law1_holds and rep.law2_holds else EXIT_FAIL


def _fmt(witness) -> str:
    if witness is None:
        return "none"
    if isinstance(witness, (tuple, list)):
        return "/".join(str(x) for x in witness)
    return str(witness)


def cmd_simulate(args) -> int:
    sf, ok = _load(args.file, args)
    if not ok:
        return EXIT_INVALID
    scenarios = sf.namespace["scenario"]
    if args.scenario:
        sc = scenarios.get(args.scenario)
        if sc is None:
            return _fail(args, EXIT_INVALID, f"unknown scenario {args.scenario!r}", "UNKNOWN_SCENARIO")
    elif len(scenarios) == 1:
        sc = next(iter(scenarios.values()))
    else:
        return _fail(args, EXIT_INVALID, f"{len(scenarios)} scenarios in file; choose one with "
                     "--scenario", "AMBIGUOUS_SCENARIO")
    if args.horizon < 0:
        return _fail(args, EXIT_INVALID, "horizon must be >= 0", "INVALID_SCENARIO")
    try:
        trace = run(sc, args.horizon, args.seed)
    except EngineError as e:
        return _fail(args, EXIT_INVALID, e.message, e.code)
    text = dumps_jsonl(trace)
    try:
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        if args.summary:
            with open(args.summary, "w", encoding="utf-8", newline="") as fh:
                fh.write(dumps_summary(trace, args.window))
    except OSError as e:
        return _fail(args, EXIT_INTERNAL, f"cannot write output: {e}", "IO_ERROR")
    if args.out:
        _emit(args, {"scenario": sc.name, "seed": args.seed, "horizon": args.horizon,
                     "events": len(trace.events), "violations": len(trace.violations),
                     "trace": args.out, "summary": args.summary},
              [f"scenario {sc.name}: {len(trace.events)} events, {len(trace.violations)} "
               f"violations over {args.horizon} ticks (seed {args.seed})"])
    return EXIT_OK


def _read_trace(args):
    try:
        return read_jsonl(args.trace), None
    except EngineError as e:
        return None, _fail(args, EXIT_INVALID, e.message, e.code)


def cmd_trend(args) -> int:
    trace, err = _read_trace(args)
    if err is not None:
        return err
    try:
        slope, verdict = interaction_trend(trace, args.product, args.window)
    except EngineError as e:
        return _fail(args, EXIT_INVALID, e.message, e.code)
    _emit(args, {"product": args.product, "window": args.window, "slope": slope, "verdict": verdict},
          [f"product {args.product}: slope {slope:.6g} events/tick^2, {verdict}"])
    return EXIT_OK if verdict == SUCCESSFUL else EXIT_FAIL


def _rate_features(trace) -> list[tuple[str, tuple[float, ...]]]:
    kinds = trace.kinds()
    totals = defaultdict(lambda: [0] * len(kinds))
    index = {k: i for i, k in enumerate(kinds)}
    for e in trace.events:
        totals[e.product][index[e.kind]] += 1
    span = max(trace.horizon, 1)
    return [(p, tuple(c / span for c in totals[p])) if p in totals else (p, (0.0,) * len(kinds))
            for p in trace.products]


def cmd_clusters(args) -> int:
    trace, err = _read_trace(args)
    if err is not None:
        return err
    if args.tau is None and trace.cluster_history:
        snap = trace.cluster_history[-1]
        assignments, tick, source = dict(snap.assignments), snap.t, "snapshot"
    else:
        tau = 1.0 if args.tau is None else args.tau
        try:
            clustering = cluster_agents(_rate_features(trace), tau)
        except EngineError as e:
            return _fail(args, EXIT_INVALID, e.message, e.code)
        assignments, tick, source = dict(clustering.assignments), trace.horizon - 1, "rates"
    count = len(set(assignments.values()))
    lines = [f"{count} cluster(s) ({source}, t={tick})"]
    lines += [f"  {p}: {c}" for p, c in sorted(assignments.items())]
    _emit(args, {"t": tick, "source": source, "count": count,
                 "assignments": dict(sorted(assignments.items()))}, lines)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", default=argparse.SUPPRESS,
                        help="machine-readable output on stdout")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="random seed (default 0)")

    p = argparse.ArgumentParser(prog="semiodesign", parents=[common],
                                description="Sign systems, semiosis laws and product life-cycle simulation.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", parents=[common], help="parse and validate .sgn files")
    s.add_argument("files", nargs="+")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("morph-check", parents=[common], help="check a morphism's preservation conditions")
    s.add_argument("file")
    s.add_argument("--morphism", required=True)
    s.set_defaults(func=cmd_morph_check)

    s = sub.add_parser("laws", parents=[common], help="check the two life-cycle laws on a sequence")
    s.add_argument("file")
    s.add_argument("--sequence", required=True)
    s.add_argument("--config", help="designated configuration for the first component")
    s.set_defaults(func=cmd_laws)

    s = sub.add_parser("simulate", parents=[common], help="run a scenario and write a JSONL trace")
    s.add_argument("file")
    s.add_argument("--scenario", help="scenario name (needed when the file holds several)")
    s.add_argument("--horizon", type=int, default=200)
    s.add_argument("--out", help="trace file (default: standard output)")
    s.add_argument("--summary", help="per-product CSV summary")
    s.add_argument("--window", type=int, default=DEFAULT_TREND_WINDOW,
                   help="filter window for the summary trend")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("trend", parents=[common], help="interaction trend of one product")
    s.add_argument("--trace", required=True)
    s.add_argument("--product", required=True)
    s.add_argument("--window", type=int, default=DEFAULT_TREND_WINDOW)
    s.set_defaults(func=cmd_trend)

    s = sub.add_parser("clusters", parents=[common], help="product-type clusters in a trace")
    s.add_argument("--trace", required=True)
    s.add_argument("--tau", type=float, help="re-cluster per-kind event rates with this threshold")
    s.set_defaults(func=cmd_clusters)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.json = getattr(args, "json", False)
    args.seed = getattr(args, "seed", 0)
    if getattr(args, "window", 1) < 1:
        return _fail(args, EXIT_INVALID, "window must be >= 1", "BAD_WINDOW")
    try:
        return args.func(args)
    except Exception as e:  # last-resort guard: report, never traceback
        print(str(Diagnostic("INTERNAL_ERROR", f"{type(e).__name__}: {e}")), file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
