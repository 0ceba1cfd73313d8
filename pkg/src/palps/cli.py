"""Command-line interface: ``palps parse|explore|check|simulate|export``.

Exit codes: 0 success, 1 model error, 2 property violated or approximate,
3 internal invariant breach.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from .environment import EvaluationError
from .parser import ParseError, format_formula, parse_formula, parse_formula_file, parse_model
from .pctl import NonConvergence, check
from .pctl_syntax import Next, Prob, Until, atoms
from .semantics import CompatibilityError, ModelError
from .simulator import Scheduler, Simulator, estimate
from .statespace import ExploreOptions, build, export
from .syntax import NoNeighbors
from .wellformed import check_wellformed, lint

EXIT_OK, EXIT_MODEL, EXIT_PROPERTY, EXIT_INTERNAL = 0, 1, 2, 3


class _ModelProblem(Exception):
    pass


def _params(pairs) -> dict:
    out = {}
    for item in pairs or ():
        if "=" not in item:
            raise _ModelProblem(f"--param expects name=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = Fraction(v.strip())
        except ValueError:
            raise _ModelProblem(f"--param {k}: {v!r} is not a number") from None
    return out


def _load(args):
    path = Path(args.model)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise _ModelProblem(f"cannot read {path}: {exc.strerror}") from None
    model = parse_model(text, str(path), _params(getattr(args, "param", None)))
    errors = check_wellformed(model)
    if errors:
        raise _ModelProblem("\n".join(str(d) for d in errors))
    return model


def _options(args) -> ExploreOptions:
    close = not args.open_channels and args.close_channels == "auto"
    return ExploreOptions(
        max_states=args.max_states,
        max_depth=args.max_depth,
        max_population=args.max_pop,
        close_channels=close,
    )


def _emit(args, payload: dict, text_lines: list[str]) -> None:
    if getattr(args, "format", "text") == "json":
        print(json.dumps(payload, sort_keys=True, indent=2))
    else:
        for line in text_lines:
            print(line)


# ---------------------------------------------------------------------------


def cmd_parse(args) -> int:
    path = Path(args.model)
    try:
        text = path.read_text(encoding="utf-8")
        model = parse_model(text, str(path), _params(args.param))
    except ParseError as exc:
        _emit(args, {"errors": [str(exc)], "warnings": []}, [f"error: {exc}"])
        return EXIT_MODEL
    errors = check_wellformed(model)
    warnings = lint(model)
    lines = [str(d) for d in errors + warnings]
    if not errors:
        lines.append(
            f"ok: {len(model.habitat.locations)} locations, {len(model.species)} species, "
            f"{len(model.constants)} process definitions"
        )
    _emit(args, {"errors": [str(d) for d in errors], "warnings": [str(d) for d in warnings]}, lines)
    return EXIT_MODEL if errors else EXIT_OK


def cmd_explore(args) -> int:
    model = _load(args)
    _, report = build(model, (), _options(args))
    payload = {
        "states": report.states,
        "transitions": report.transitions,
        "terminal": report.terminal,
        "deadlock": report.deadlock,
        "depth": report.max_depth,
        "truncated": report.truncated,
        "truncation_reason": report.reason,
    }
    _emit(args, payload, report.lines())
    return EXIT_OK


def _read_formulas(args, model):
    if args.formula:
        return [(1, parse_formula(args.formula, model))]
    path = Path(args.properties)
    return parse_formula_file(path.read_text(encoding="utf-8"), model)


def cmd_check(args) -> int:
    model = _load(args)
    formulas = _read_formulas(args, model)
    all_atoms = [a for _, f in formulas for a in atoms(f)]
    mdp, report = build(model, all_atoms, _options(args))
    results = [check(mdp, f, args.quantifier) for _, f in formulas]
    ok = all((r.verdict is not False) and not r.approximate for r in results)
    lines = [r.line() for r in results]
    if report.truncated:
        lines.append(f"note: state space truncated ({report.reason}); results are bracketed")
    payload = {
        "results": [r.as_dict() for r in results],
        "states": report.states,
        "truncated": report.truncated,
    }
    _emit(args, payload, lines)
    return EXIT_OK if ok else EXIT_PROPERTY


def cmd_simulate(args) -> int:
    model = _load(args)
    close = not args.open_channels and args.close_channels == "auto"
    sched = Scheduler(args.scheduler, args.seed)
    if args.formula or args.properties:
        formulas = _read_formulas(args, model)
        print(
            "warning: estimates are for one randomised scheduler, not PCTL min/max bounds",
            file=sys.stderr,
        )
        payload, lines = [], []
        for _, f in formulas:
            if not isinstance(f, Prob) or not isinstance(f.path, (Next, Until)):
                print(f"skipped (no top-level P operator): {format_formula(f)}", file=sys.stderr)
                continue
            est = estimate(
                model, f.path, args.samples, sched, args.seed,
                max_ticks=args.max_ticks, confidence=args.confidence, threads=args.threads, close=close,
            )
            d = est.as_dict()
            d["formula"] = format_formula(f)
            payload.append(d)
            lines.append(
                f"{format_formula(f)}  estimate={est.point:.6g}  "
                f"[{est.low:.6g}, {est.high:.6g}]  n={est.samples}"
            )
        _emit(args, {"estimates": payload}, lines)
        return EXIT_OK
    sim = Simulator(model, close, sched)
    trace = sim.run(args.max_ticks, args.seed)
    if args.csv:
        Path(args.csv).write_text(trace.to_csv(), encoding="utf-8")
    if args.jsonl:
        Path(args.jsonl).write_text(trace.to_jsonl(), encoding="utf-8")
    end = "terminated" if trace.terminated else "deadlock" if trace.deadlock else "stalled" if trace.stalled else "horizon"
    payload = {"ticks": trace.ticks, "steps": len(trace.steps) - 1, "end": end, "seed": trace.seed}
    lines = [f"ticks: {trace.ticks}", f"steps: {len(trace.steps) - 1}", f"end: {end}"]
    if not args.csv and not args.jsonl and args.format != "json":
        sys.stdout.write(trace.to_csv())
    _emit(args, payload, lines)
    return EXIT_OK


def cmd_export(args) -> int:
    model = _load(args)
    exprs = []
    if args.properties:
        for _, f in parse_formula_file(Path(args.properties).read_text(encoding="utf-8"), model):
            exprs.extend(atoms(f))
    mdp, report = build(model, exprs, _options(args))
    out = args.output or str(Path(args.model).with_suffix(""))
    files = export(mdp, out)
    _emit(args, {"files": files, "states": report.states}, [f"wrote {f}" for f in files])
    return EXIT_OK


# ---------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="palps", description="PALPS population models: parse, explore, check, simulate.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, explore=True):
        p.add_argument("model", help="model file (.palps)")
        p.add_argument("--param", action="append", metavar="NAME=VALUE", help="override a declared parameter")
        p.add_argument("--format", choices=("text", "json"), default="text")
        p.add_argument("--open-channels", action="store_true", help="do not restrict rep_s/prey_s at top level")
        p.add_argument("--close-channels", choices=("auto", "off"), default="auto")
        if explore:
            p.add_argument("--max-states", type=int)
            p.add_argument("--max-depth", type=int)
            p.add_argument("--max-pop", type=int, help="maximum population per location")

    p = sub.add_parser("parse", help="parse and lint a model")
    p.add_argument("model")
    p.add_argument("--param", action="append", metavar="NAME=VALUE")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("explore", help="build the reachable state space")
    common(p)
    p.set_defaults(func=cmd_explore)

    p = sub.add_parser("check", help="model check PCTL properties")
    common(p)
    p.add_argument("properties", nargs="?", help="property file (.pctl)")
    p.add_argument("--formula", help="a single formula instead of a file")
    p.add_argument("--quantifier", choices=("min", "max"))
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("simulate", help="sample executions")
    common(p, explore=False)
    p.add_argument("properties", nargs="?", help="property file to estimate")
    p.add_argument("--formula")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--max-ticks", type=int, default=100)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--scheduler", choices=("uniform", "first", "seeded"), default="seeded")
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--csv", help="write the per-tick census here")
    p.add_argument("--jsonl", help="write the event log here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("export", help="write .sta/.tra/.lab files")
    common(p)
    p.add_argument("output", nargs="?", help="output path without extension")
    p.add_argument("--properties", help="label states with the atoms of this property file")
    p.set_defaults(func=cmd_export)
    return ap


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on bad usage, which would read as a violation
        return EXIT_MODEL if exc.code else 0
    if args.command == "check" and not (args.properties or args.formula):
        print("error: check needs a property file or --formula", file=sys.stderr)
        return EXIT_MODEL
    try:
        return args.func(args)
    except (CompatibilityError, AssertionError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (ParseError, _ModelProblem, ModelError, EvaluationError, NoNeighbors, NonConvergence, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
