"""Command-line entry point: ``qfl <subcommand> ...``.

Exit codes: 0 success, 1 usage or input error, 2 analysis undefined (the
program passes its whole suite, so there is nothing to localize).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

from qfl.bench import (
    ReferenceFailsSuite, build_desk_benchmark, compare_methods, evaluate, inject_faults, load_benchmark,
    medians_by_origin, records_from_csv, write_evaluation, write_item,
)
from qfl.frontend import FrontendError, diff_ground_truth, load, serialize, validate
from qfl.localize import METHODS, MUSE, OCHIAI, TARANTULA, NoFailingTests, format_table, localize
from qfl.mutate import DEFAULT_OPS, generate_mutants, parse_ops
from qfl.runner import (
    DEFAULT_BUDGET, DEFAULT_TOLERANCE, PRESET_BUDGETS, SuiteShapeMismatch, check_suite_shape, load_suite,
    run_matrix, run_suite,
)
from qfl.simulator import DEFAULT_MAX_BRANCHES

log = logging.getLogger("qfl")

EXIT_OK, EXIT_INPUT, EXIT_UNDEFINED = 0, 1, 2
FORMATS = ("json", "csv", "table")
WORKERS_ENV = "QFL_WORKERS"


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class Config:
    ops: tuple[str, ...] = DEFAULT_OPS
    budget: float = DEFAULT_BUDGET
    workers: int = 1
    max_branches: int = DEFAULT_MAX_BRANCHES
    tolerance: float = DEFAULT_TOLERANCE
    out: str = "qfl-out"
    format: str = "table"

    def __post_init__(self):
        object.__setattr__(self, "ops", parse_ops(self.ops))
        for name in ("budget", "workers", "max_branches", "tolerance"):
            if not getattr(self, name) > 0:
                raise UsageError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.format not in FORMATS:
            raise UsageError(f"format must be one of {', '.join(FORMATS)}")

    @classmethod
    def from_file(cls, path) -> "Config":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known - {"budget_preset"}
        if unknown:
            raise UsageError(f"{path}: unknown config keys {sorted(unknown)}")
        if "budget_preset" in data:
            data["budget"] = _preset(data.pop("budget_preset"))
        if isinstance(data.get("ops"), str):
            data["ops"] = parse_ops(data["ops"])
        return cls(**data)


def _preset(name: str) -> float:
    if name not in PRESET_BUDGETS:
        raise UsageError(f"unknown budget preset {name!r}; known: {', '.join(PRESET_BUDGETS)}")
    return PRESET_BUDGETS[name]


def _default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return 1
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{WORKERS_ENV}={raw!r} is not an integer") from None


def config_from_args(args) -> Config:
    base = Config.from_file(args.config) if getattr(args, "config", None) else Config()
    if os.environ.get(WORKERS_ENV) is not None:
        base = replace(base, workers=_default_workers())
    overrides = {}
    if getattr(args, "ops", None) is not None:
        overrides["ops"] = parse_ops(args.ops)
    if getattr(args, "budget_preset", None) is not None:
        overrides["budget"] = _preset(args.budget_preset)
    for name in ("budget", "workers", "max_branches", "tolerance", "out", "format"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    return replace(base, **overrides)


def _load_program(path):
    try:
        p = load(path)
        validate(p)
        return p
    except FrontendError as exc:
        loc = f"{path}:{exc.line}:{exc.column or 1}" if exc.line is not None else str(path)
        raise UsageError(f"{loc}: {type(exc).__name__}: {exc.message}") from None


def _load_suite(path, p, cfg: Config):
    try:
        suite = load_suite(path, cfg.tolerance)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{path}: bad test suite: {exc}") from None
    try:
        check_suite_shape(p, suite)
    except SuiteShapeMismatch as exc:
        raise UsageError(f"{path}: {exc}") from None
    return suite


def _emit(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


# -- subcommands

def cmd_check(args, cfg: Config) -> int:
    p = _load_program(args.program)
    info = {"path": str(args.program), "statements": len(p), "qubits": p.qubit_count,
            "clbits": p.clbit_count}
    if cfg.format == "json":
        _emit(json.dumps(info, indent=2))
    else:
        _emit(f"{args.program}: ok, {len(p)} statements, {p.qubit_count} qubits, {p.clbit_count} clbits")
    return EXIT_OK


def cmd_mutate(args, cfg: Config) -> int:
    p = _load_program(args.program)
    mutants = generate_mutants(p, cfg.ops)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for m in mutants:
            (out / f"{m.id}.qasm").write_text(serialize(m.program))
    rows = [{"id": m.id, "operator": m.operator.code, "category": m.category, "target": m.target_stmt,
             "mutation": m.payload} for m in mutants]
    if cfg.format == "json":
        _emit(json.dumps(rows, indent=2))
    elif cfg.format == "csv":
        _emit("id,operator,category,target\n" + "".join(
            f"{r['id']},{r['operator']},{r['category']},{r['target']}\n" for r in rows))
    else:
        for r in rows:
            _emit(f"{r['id']:<16} {r['category']:<9} {r['mutation']}")
        _emit(f"{len(rows)} mutants")
    return EXIT_OK


def cmd_test(args, cfg: Config) -> int:
    p = _load_program(args.program)
    suite = _load_suite(args.suite, p, cfg)
    verdicts = run_suite(p, suite, cfg.budget, cfg.max_branches)
    rows = [{"test": t.name, "verdict": v.status, "tvd": v.tvd, "covered": sorted(v.covered),
             "message": v.message} for t, v in zip(suite, verdicts)]
    if cfg.format == "json":
        _emit(json.dumps(rows, indent=2))
    else:
        for r in rows:
            tv = "" if r["tvd"] is None else f" tvd={r['tvd']:.3g}"
            _emit(f"{r['verdict']} {r['test']}{tv} {r['message']}".rstrip())
        passed = sum(v.passed for v in verdicts)
        _emit(f"{passed}/{len(verdicts)} passed")
    return EXIT_OK


def _faulty_from_args(args, p):
    if args.faulty:
        try:
            return {int(x) for x in args.faulty.split(",") if x.strip()}
        except ValueError:
            raise UsageError(f"--faulty expects comma-separated statement ids, got {args.faulty!r}") from None
    if args.reference:
        ref = _load_program(args.reference)
        try:
            return diff_ground_truth(p, ref)
        except FrontendError as exc:
            raise UsageError(f"{args.reference}: {exc}") from None
    return None


def cmd_localize(args, cfg: Config) -> int:
    p = _load_program(args.program)
    suite = _load_suite(args.suite, p, cfg)
    faulty = _faulty_from_args(args, p)
    mutants = generate_mutants(p, cfg.ops)
    matrix = run_matrix(p, mutants, suite, cfg.budget, cfg.workers, cfg.max_branches)
    methods = [MUSE] + ([OCHIAI, TARANTULA] if args.sbfl else [])
    try:
        reports = [localize(matrix, mutants, p, faulty, m) for m in methods]
    except NoFailingTests:
        sys.stderr.write(f"{args.program}: no failing tests; nothing to localize\n")
        return EXIT_UNDEFINED
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "matrix.csv").write_text(matrix.to_csv())
    for rep in reports:
        (out / f"report_{rep.method}.json").write_text(rep.to_json())
        if rep.degenerate:
            sys.stderr.write(f"warning: {rep.method} is degenerate for this suite "
                             "(a single test, or no passing or no failing tests); scores carry no ranking\n")
    if cfg.format == "json":
        _emit(json.dumps([r.to_dict() for r in reports], indent=2))
    else:
        _emit("\n\n".join(format_table(r, p) for r in reports))
    return EXIT_OK


def cmd_inject(args, cfg: Config) -> int:
    ref = _load_program(args.reference)
    suite = _load_suite(args.suite, ref, cfg)
    try:
        items = inject_faults(ref, suite, cfg.ops, cfg.budget, prefix=args.prefix, workers=cfg.workers,
                              max_branches=cfg.max_branches)
    except ReferenceFailsSuite as exc:
        raise UsageError(f"{args.reference}: {exc}") from None
    for it in items:
        write_item(it, args.out)
    _emit(f"{len(items)} items written to {args.out}")
    return EXIT_OK


def cmd_desk_benchmark(args, cfg: Config) -> int:
    items = build_desk_benchmark(cfg.ops, cfg.budget, cfg.workers)
    for it in items:
        write_item(it, args.out)
    _emit(f"{len(items)} items written to {args.out}")
    return EXIT_OK


def _methods(text: str) -> tuple[str, ...]:
    methods = tuple(dict.fromkeys(m.strip().lower() for m in text.split(",") if m.strip()))
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise UsageError(f"unknown methods {bad}; known: {', '.join(METHODS)}")
    return methods


def _medians_table(records) -> str:
    lines = [f"{'method':<10} {'origin':<9} {'n':>4} {'med best':>9} {'med worst':>9}"]
    for method, by_origin in medians_by_origin(records).items():
        for origin, m in by_origin.items():
            lines.append(f"{method:<10} {origin:<9} {m['n']:>4} {m['median_best']:>9.2f} {m['median_worst']:>9.2f}")
    return "\n".join(lines)


def cmd_evaluate(args, cfg: Config) -> int:
    root = Path(args.benchmark)
    if not root.is_dir():
        raise UsageError(f"{root}: not a directory")
    items, errors = load_benchmark(root, validate=not args.no_validate, budget=cfg.budget)
    for name, msg in sorted(errors.items()):
        sys.stderr.write(f"skipping {root / name}: {msg}\n")
    if not items:
        raise UsageError(f"{root}: no valid benchmark items")
    ev = evaluate(items, _methods(args.methods), cfg.ops, cfg.budget, cfg.workers, cfg.max_branches)
    write_evaluation(ev, cfg.out)
    if ev.records and not any(r.ok for r in ev.records):
        sys.stderr.write("every item failed to evaluate\n")
        return EXIT_INPUT
    if cfg.format == "json":
        _emit(json.dumps(ev.stats(), indent=2, sort_keys=True))
    else:
        _emit(_medians_table(ev.records))
        _emit(f"results written to {cfg.out}")
    return EXIT_OK


def cmd_compare(args, cfg: Config) -> int:
    try:
        records = records_from_csv(Path(args.records).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"{args.records}: {exc.strerror}") from None
    except (KeyError, ValueError) as exc:
        raise UsageError(f"{args.records}: malformed records file ({exc})") from None
    result = compare_methods(records, args.baseline)
    if cfg.format == "json":
        _emit(json.dumps(result, indent=2, sort_keys=True))
        return EXIT_OK
    _emit(_medians_table(records))
    for name, entry in result.items():
        for sc in ("best", "worst"):
            d, pv = entry[sc]["cliffs_delta"], entry[sc]["p_value"]
            d = "n/a" if d is None else f"{d:+.3f}"
            pv = "n/a" if pv is None else f"{pv:.3g}"
            _emit(f"{name:<20} {sc:<6} n={entry['n']:<5} delta={d:<8} p={pv}")
    return EXIT_OK


# -- argument parsing

def _common(sp, *, ops=False, budget=False, workers=False, out=False):
    sp.add_argument("--config", help="JSON config file; flags override it")
    sp.add_argument("--format", choices=FORMATS)
    if ops:
        sp.add_argument("--ops", help=f"comma-separated operator codes (default {','.join(DEFAULT_OPS)})")
    if budget:
        sp.add_argument("--budget", type=float, help="seconds per test execution")
        sp.add_argument("--budget-preset", choices=sorted(PRESET_BUDGETS))
        sp.add_argument("--max-branches", type=int)
    if workers:
        sp.add_argument("--workers", type=int, help=f"worker processes (default ${WORKERS_ENV} or 1)")
    if out:
        sp.add_argument("--out", help="output directory")


class _ArgumentParser(argparse.ArgumentParser):
    # argparse exits with 2, which this tool reserves for "nothing to localize"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _ArgumentParser(prog="qfl", description="Mutation-based fault localization for quantum circuits.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("check", help="parse and validate a program")
    sp.add_argument("program")
    _common(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("mutate", help="list the mutants of a program")
    sp.add_argument("program")
    sp.add_argument("--out", help="also write each mutant as <id>.qasm here")
    _common(sp, ops=True)
    sp.set_defaults(func=cmd_mutate)

    sp = sub.add_parser("test", help="run a test suite on a program")
    sp.add_argument("program")
    sp.add_argument("suite")
    sp.add_argument("--tolerance", type=float, help="TVD tolerance for tests that set none")
    _common(sp, budget=True)
    sp.set_defaults(func=cmd_test)

    sp = sub.add_parser("localize", help="rank statements by suspiciousness")
    sp.add_argument("program")
    sp.add_argument("suite")
    sp.add_argument("--sbfl", action="store_true", help="also report Ochiai and Tarantula")
    group = sp.add_mutually_exclusive_group()
    group.add_argument("--faulty", help="known faulty statement ids, for EXAM scores")
    group.add_argument("--reference", help="fixed program; faulty ids come from the diff")
    _common(sp, ops=True, budget=True, workers=True, out=True)
    sp.set_defaults(func=cmd_localize)

    sp = sub.add_parser("inject", help="build benchmark items by fault injection")
    sp.add_argument("reference")
    sp.add_argument("suite")
    sp.add_argument("--out", required=True)
    sp.add_argument("--prefix", default="")
    _common(sp, ops=True, budget=True, workers=True)
    sp.set_defaults(func=cmd_inject)

    sp = sub.add_parser("desk-benchmark", help="write the shipped seed-injected and curated benchmark")
    sp.add_argument("out")
    _common(sp, ops=True, budget=True, workers=True)
    sp.set_defaults(func=cmd_desk_benchmark)

    sp = sub.add_parser("evaluate", help="evaluate localization methods over a benchmark directory")
    sp.add_argument("benchmark")
    sp.add_argument("--methods", default=",".join(METHODS))
    sp.add_argument("--no-validate", action="store_true", help="skip re-running item invariants on load")
    _common(sp, ops=True, budget=True, workers=True, out=True)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("compare", help="effect size and signed-rank test from records.csv")
    sp.add_argument("records")
    sp.add_argument("--baseline", default=MUSE)
    _common(sp)
    sp.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        return args.func(args, cfg)
    except UsageError as exc:
        sys.stderr.write(f"qfl: error: {exc}\n")
        return EXIT_INPUT
    except (OSError, ValueError) as exc:
        sys.stderr.write(f"qfl: error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
