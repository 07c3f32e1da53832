"""Fault-injection benchmarks and batch evaluation of localization methods.

A benchmark on disk is a directory with one sub-directory per item holding
``buggy.qasm``, ``reference.qasm``, ``tests.json`` and ``meta.json``.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from qfl.frontend import FrontendError, Program, load, parse, serialize
from qfl.localize import METHODS, MUSE, NoFailingTests, localize
from qfl.mutate import CLASSICAL, DEFAULT_OPS, NO_TARGET, OPERATORS, QUANTUM, generate_mutants, parse_ops
from qfl.runner import (
    DEFAULT_BUDGET, FAIL, PASS, TIMEOUT, TestCase, behavior_changing_counts, dump_suite,
    load_suite, run_matrix, run_suite, suite_from_json,
)
from qfl.simulator import DEFAULT_MAX_BRANCHES
from qfl.stats import AllDifferencesZero, cliffs_delta, wilcoxon_one_sided

log = logging.getLogger(__name__)

SCENARIOS = ("best", "worst")
SEED_NAMES = ("bell", "ghz3", "teleport", "qft3", "grover2")


class InvalidItem(ValueError):
    pass


class ReferenceFailsSuite(ValueError):
    pass


@dataclass(frozen=True)
class BenchmarkItem:
    id: str
    buggy: Program
    reference: Program
    suite: tuple[TestCase, ...]
    ground_truth: frozenset[int]
    origin: dict = field(compare=False, hash=False)

    @property
    def kind(self) -> str:
        return self.origin.get("kind", "curated")


def validate_item(item: BenchmarkItem, budget: float | None = DEFAULT_BUDGET) -> None:
    if not item.ground_truth:
        raise InvalidItem(f"{item.id}: empty ground truth")
    if not item.ground_truth <= {s.id for s in item.buggy.statements}:
        raise InvalidItem(f"{item.id}: ground truth names statements the buggy program lacks")
    if not all(v.status == PASS for v in run_suite(item.reference, item.suite, budget)):
        raise InvalidItem(f"{item.id}: reference does not pass its suite")
    if not any(v.status == FAIL for v in run_suite(item.buggy, item.suite, budget)):
        raise InvalidItem(f"{item.id}: buggy program fails no test")


def inject_faults(reference: Program, suite: Sequence[TestCase], ops: Iterable[str] = DEFAULT_OPS,
                  budget: float | None = DEFAULT_BUDGET, prefix: str = "", workers: int = 1,
                  max_branches: int = DEFAULT_MAX_BRANCHES) -> list[BenchmarkItem]:
    """Turn every mutant of ``reference`` that fails at least one test into an item.

    Mutants that pass everything (equivalent) or only crash or time out are
    dropped.  The ground truth is the mutated statement; a deleted statement
    no longer exists in the buggy program, so the one before it is blamed.
    """
    suite = tuple(suite)
    if not all(v.status == PASS for v in run_suite(reference, suite, budget, max_branches)):
        raise ReferenceFailsSuite("the reference program does not pass its own suite")
    mutants = generate_mutants(reference, ops)
    matrix = run_matrix(reference, mutants, suite, budget, workers, max_branches)
    items = []
    for m in mutants:
        row = matrix.rows[m.id]
        if any(v.status == TIMEOUT for v in row) or not any(v.status == FAIL for v in row):
            continue
        if not m.program.statements:
            continue
        if m.target_stmt == NO_TARGET:  # prepended layer
            faulty = 0
        elif len(m.program) == len(reference):
            faulty = m.target_stmt
        else:
            faulty = max(m.target_stmt - 1, 0)
        items.append(BenchmarkItem(
            id=f"{prefix}{m.id}",
            buggy=m.program,
            reference=reference,
            suite=suite,
            ground_truth=frozenset({faulty}),
            origin={"kind": "injected", "operator": m.operator.code, "category": m.category,
                    "mutation": m.payload, "target": m.target_stmt},
        ))
    return items


# -- on-disk layout

def write_item(item: BenchmarkItem, root) -> Path:
    d = Path(root) / item.id
    d.mkdir(parents=True, exist_ok=True)
    (d / "buggy.qasm").write_text(serialize(item.buggy))
    (d / "reference.qasm").write_text(serialize(item.reference))
    (d / "tests.json").write_text(dump_suite(item.suite))
    meta = {"id": item.id, "origin": item.origin, "ground_truth": sorted(item.ground_truth)}
    (d / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return d


def load_item(d) -> BenchmarkItem:
    d = Path(d)
    with open(d / "meta.json", encoding="utf-8") as fh:
        meta = json.load(fh)
    return BenchmarkItem(
        id=meta.get("id", d.name),
        buggy=load(d / "buggy.qasm"),
        reference=load(d / "reference.qasm"),
        suite=tuple(load_suite(d / "tests.json")),
        ground_truth=frozenset(meta["ground_truth"]),
        origin=meta.get("origin", {"kind": "curated"}),
    )


def load_benchmark(root, validate: bool = False,
                   budget: float | None = DEFAULT_BUDGET) -> tuple[list[BenchmarkItem], dict[str, str]]:
    """Items sorted by id, plus a map of skipped directories to their error message."""
    items, errors = [], {}
    for d in sorted(p for p in Path(root).iterdir() if p.is_dir()):
        try:
            item = load_item(d)
            if validate:
                validate_item(item, budget)
            items.append(item)
        except (OSError, ValueError, KeyError, FrontendError) as exc:
            errors[d.name] = f"{type(exc).__name__}: {exc}"
    items.sort(key=lambda it: it.id)
    return items, errors


def _data_dir():
    return resources.files("qfl") / "data"


def seed(name: str) -> tuple[Program, list[TestCase]]:
    d = _data_dir() / "seeds" / name
    prog = parse(d.joinpath("program.qasm").read_text(), f"seeds/{name}/program.qasm")
    return prog, suite_from_json(json.loads(d.joinpath("tests.json").read_text()))


def curated_items() -> list[BenchmarkItem]:
    root = _data_dir() / "curated"
    with resources.as_file(root) as path:
        items, errors = load_benchmark(path)
    if errors:
        raise InvalidItem(f"broken curated fixtures: {errors}")
    return items


def build_desk_benchmark(ops: Iterable[str] = DEFAULT_OPS, budget: float | None = DEFAULT_BUDGET,
                         workers: int = 1) -> list[BenchmarkItem]:
    """Injected items from the five seed programs followed by the curated pattern faults."""
    items = []
    for name in SEED_NAMES:
        prog, suite = seed(name)
        items += inject_faults(prog, suite, ops, budget, prefix=f"{name}-", workers=workers)
    return sorted(items, key=lambda it: it.id) + curated_items()


# -- evaluation

@dataclass(frozen=True)
class EvalRecord:
    item_id: str
    origin: str
    method: str
    exam_best: float | None
    exam_worst: float | None
    n_statements: int
    n_mutants: int
    behavior_changing: dict[str, int]
    degenerate: bool = False
    error: str = ""
    wall_time: float = field(default=0.0, compare=False)

    @property
    def ok(self) -> bool:
        return not self.error

    def bc_by_category(self) -> dict[str, int]:
        out = {QUANTUM: 0, CLASSICAL: 0}
        for code, n in self.behavior_changing.items():
            out[OPERATORS[code].category] += n
        return out


RECORD_FIELDS = ("item_id", "origin", "method", "status", "exam_best", "exam_worst", "degenerate",
                 "n_statements", "n_mutants", "bc_quantum", "bc_classical", "bc_by_operator", "error")


@dataclass
class Evaluation:
    records: list[EvalRecord]
    ops: tuple[str, ...]
    methods: tuple[str, ...]

    def ecdf(self, method: str, scenario: str) -> list[tuple[float, float]]:
        values = [getattr(r, f"exam_{scenario}") for r in self.records if r.method == method and r.ok]
        return ecdf(values)

    def records_csv(self) -> str:
        return records_to_csv(self.records)

    def accounting(self) -> dict:
        return mutant_accounting(self.records, self.ops)

    def stats(self) -> dict:
        return {
            "methods": list(self.methods),
            "operators": list(self.ops),
            "comparisons": compare_methods(self.records),
            "medians": medians_by_origin(self.records),
            "accounting": self.accounting(),
        }


def ecdf(values: Iterable[float]) -> list[tuple[float, float]]:
    """(value, fraction of values <= value) for each sorted value."""
    xs = sorted(values)
    n = len(xs)
    return [(x, (i + 1) / n) for i, x in enumerate(xs)]


def _item_job(args) -> list[EvalRecord]:
    item, methods, ops, budget, max_branches = args
    t0 = time.monotonic()
    base = dict(item_id=item.id, origin=item.kind, n_statements=len(item.buggy))
    try:
        mutants = generate_mutants(item.buggy, ops)
        matrix = run_matrix(item.buggy, mutants, item.suite, budget, 1, max_branches)
    except Exception as exc:  # recorded per item; the batch goes on
        msg = f"{type(exc).__name__}: {exc}"
        return [EvalRecord(method=m, exam_best=None, exam_worst=None, n_mutants=0, behavior_changing={},
                           error=msg, **base) for m in methods]
    bc = behavior_changing_counts(matrix, mutants)
    records = []
    for method in methods:
        try:
            rep = localize(matrix, mutants, item.buggy, item.ground_truth, method)
            records.append(EvalRecord(method=method, exam_best=rep.exam_best, exam_worst=rep.exam_worst,
                                      n_mutants=len(mutants), behavior_changing=bc,
                                      degenerate=rep.degenerate, wall_time=time.monotonic() - t0, **base))
        except (NoFailingTests, ValueError) as exc:
            records.append(EvalRecord(method=method, exam_best=None, exam_worst=None, n_mutants=len(mutants),
                                      behavior_changing=bc, error=f"{type(exc).__name__}: {exc}", **base))
    return records


def evaluate(items: Sequence[BenchmarkItem], methods: Sequence[str] = METHODS,
             ops: Iterable[str] = DEFAULT_OPS, budget: float | None = DEFAULT_BUDGET, workers: int = 1,
             max_branches: int = DEFAULT_MAX_BRANCHES) -> Evaluation:
    """Localize every item with every method.  Record order is (item id, method order)."""
    ops = parse_ops(ops)
    methods = tuple(methods)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; known: {', '.join(METHODS)}")
    items = sorted(items, key=lambda it: it.id)
    if not methods:
        return Evaluation([], ops, methods)
    jobs = [(it, methods, ops, budget, max_branches) for it in items]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_item_job, jobs))
    else:
        results = [_item_job(j) for j in jobs]
    records = [r for rs in results for r in rs]
    for r in records:
        if r.error:
            log.warning("item %s (%s): %s", r.item_id, r.method, r.error)
    return Evaluation(records, ops, methods)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def records_to_csv(records: Sequence[EvalRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_FIELDS)
    for r in records:
        cat = r.bc_by_category()
        by_op = ";".join(f"{k}={v}" for k, v in sorted(r.behavior_changing.items()))
        w.writerow([r.item_id, r.origin, r.method, "ok" if r.ok else "error", _fmt(r.exam_best),
                    _fmt(r.exam_worst), _fmt(r.degenerate), r.n_statements, r.n_mutants,
                    cat[QUANTUM], cat[CLASSICAL], by_op, r.error])
    return buf.getvalue()


def records_from_csv(text: str) -> list[EvalRecord]:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        by_op = {}
        for part in filter(None, row["bc_by_operator"].split(";")):
            k, v = part.split("=")
            by_op[k] = int(v)
        out.append(EvalRecord(
            item_id=row["item_id"], origin=row["origin"], method=row["method"],
            exam_best=float(row["exam_best"]) if row["exam_best"] else None,
            exam_worst=float(row["exam_worst"]) if row["exam_worst"] else None,
            n_statements=int(row["n_statements"]), n_mutants=int(row["n_mutants"]),
            behavior_changing=by_op, degenerate=row["degenerate"] == "1",
            error=row["error"] if row["status"] != "ok" else "",
        ))
    return out


def mutant_accounting(records: Sequence[EvalRecord], ops: Sequence[str]) -> dict:
    """Behavior-changing mutants per operator and category, summed over items.

    "avg_per_op" divides a category's total by the number of its operators in
    the configured set.
    """
    per_item: dict[str, dict[str, int]] = {}
    for r in records:
        per_item.setdefault(r.item_id, r.behavior_changing)
    per_op = {code: 0 for code in ops}
    for counts in per_item.values():
        for code, n in counts.items():
            per_op[code] = per_op.get(code, 0) + n
    total = sum(per_op.values())
    categories = {}
    for cat in (QUANTUM, CLASSICAL):
        codes = [c for c in ops if OPERATORS[c].category == cat]
        n = sum(per_op.get(c, 0) for c in codes)
        categories[cat] = {
            "operators": codes,
            "n_ops": len(codes),
            "behavior_changing": n,
            "share": n / total if total else 0.0,
            "avg_per_op": n / len(codes) if codes else 0.0,
        }
    return {"items": len(per_item), "per_operator": per_op, "categories": categories}


def medians_by_origin(records: Sequence[EvalRecord]) -> dict:
    out: dict = {}
    for r in records:
        if not r.ok:
            continue
        slot = out.setdefault(r.method, {}).setdefault(r.origin, {"best": [], "worst": []})
        slot["best"].append(r.exam_best)
        slot["worst"].append(r.exam_worst)
    return {
        method: {origin: {"n": len(v["best"]), "median_best": statistics.median(v["best"]),
                          "median_worst": statistics.median(v["worst"])}
                 for origin, v in sorted(by_origin.items())}
        for method, by_origin in sorted(out.items())
    }


def compare_methods(records: Sequence[EvalRecord], baseline: str = MUSE) -> dict:
    """Baseline vs every other method: Cliff's delta and one-sided signed-rank p per scenario.

    Only items where both methods produced an EXAM value are paired.
    """
    by_method: dict[str, dict[str, EvalRecord]] = {}
    for r in records:
        if r.ok:
            by_method.setdefault(r.method, {})[r.item_id] = r
    if baseline not in by_method:
        return {}
    out = {}
    for other in sorted(m for m in by_method if m != baseline):
        common = sorted(set(by_method[baseline]) & set(by_method[other]))
        entry = {"n": len(common)}
        for sc in SCENARIOS:
            a = [getattr(by_method[baseline][i], f"exam_{sc}") for i in common]
            b = [getattr(by_method[other][i], f"exam_{sc}") for i in common]
            if not common:
                entry[sc] = {"cliffs_delta": None, "p_value": None}
                continue
            try:
                p = wilcoxon_one_sided(list(zip(a, b)))
            except AllDifferencesZero:
                p = None
            entry[sc] = {"cliffs_delta": cliffs_delta(a, b), "p_value": p}
        out[f"{baseline}_vs_{other}"] = entry
    return out


def write_evaluation(ev: Evaluation, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "records.csv"]
    written[0].write_text(ev.records_csv())
    for method in ev.methods:
        for sc in SCENARIOS:
            path = out / f"ecdf_{method}_{sc}.csv"
            rows = "".join(f"{x!r},{f!r}\n" for x, f in ev.ecdf(method, sc))
            path.write_text("exam,cumulative_fraction\n" + rows)
            written.append(path)
    path = out / "stats.json"
    path.write_text(json.dumps(ev.stats(), indent=2, sort_keys=True) + "\n")
    written.append(path)
    return written
