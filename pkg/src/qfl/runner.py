"""Test-suite execution and the (version x test) verdict matrix."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from qfl.frontend import Program
from qfl.mutate import Mutant
from qfl.simulator import (
    DEFAULT_MAX_BRANCHES, BudgetExceeded, RunOptions, SimulationError, run_batch,
)

PASS, FAIL, TIMEOUT, ERROR = "P", "F", "T", "E"
ORIGINAL = "original"
DEFAULT_BUDGET = 10.0
DEFAULT_TOLERANCE = 1e-9
PRESET_BUDGETS = {"desk": DEFAULT_BUDGET, "hour": 3600.0}


class SuiteShapeMismatch(ValueError):
    pass


@dataclass(frozen=True)
class TestCase:
    name: str
    expected: dict[str, float]
    tolerance: float = DEFAULT_TOLERANCE
    input: str | None = None
    shots: int | None = None
    seed: int | None = None

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if not self.expected:
            raise ValueError(f"test {self.name!r}: empty expected distribution")
        widths = {len(k) for k in self.expected}
        if len(widths) != 1 or any(set(k) - {"0", "1"} for k in self.expected):
            raise ValueError(f"test {self.name!r}: expected keys must be bitstrings of one width")
        if abs(sum(self.expected.values()) - 1.0) > 1e-9:
            raise ValueError(f"test {self.name!r}: expected probabilities sum to {sum(self.expected.values())}")
        if not 0 <= self.tolerance <= 1:
            raise ValueError(f"test {self.name!r}: tolerance must lie in [0, 1]")

    @property
    def width(self) -> int:
        return len(next(iter(self.expected)))

    def to_json(self) -> dict:
        out = {"name": self.name, "expected": dict(self.expected), "tolerance": self.tolerance}
        for key in ("input", "shots", "seed"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        return out


def suite_from_json(data: dict, default_tolerance: float = DEFAULT_TOLERANCE) -> list[TestCase]:
    tests = []
    for t in data["tests"]:
        tests.append(TestCase(
            name=t["name"],
            expected={str(k): float(v) for k, v in t["expected"].items()},
            tolerance=float(t.get("tolerance", default_tolerance)),
            input=t.get("input"),
            shots=t.get("shots"),
            seed=t.get("seed"),
        ))
    names = [t.name for t in tests]
    if len(set(names)) != len(names):
        raise ValueError("duplicate test names in suite")
    return tests


def load_suite(path, default_tolerance: float = DEFAULT_TOLERANCE) -> list[TestCase]:
    with open(path, encoding="utf-8") as fh:
        return suite_from_json(json.load(fh), default_tolerance)


def dump_suite(suite: Sequence[TestCase]) -> str:
    return json.dumps({"tests": [t.to_json() for t in suite]}, indent=2, sort_keys=True) + "\n"


@dataclass(frozen=True)
class Verdict:
    status: str
    covered: frozenset[int] = frozenset()
    tvd: float | None = None
    message: str = field(default="", compare=False)

    @property
    def passed(self) -> bool:
        return self.status == PASS


def tvd(actual: dict[str, float], expected: dict[str, float]) -> float:
    keys = set(actual) | set(expected)
    return 0.5 * math.fsum(abs(actual.get(k, 0.0) - expected.get(k, 0.0)) for k in keys)


def check_suite_shape(p: Program, suite: Sequence[TestCase]) -> None:
    if not suite:
        raise SuiteShapeMismatch("test suite is empty")
    for t in suite:
        if t.width != p.clbit_count:
            raise SuiteShapeMismatch(
                f"test {t.name!r} expects {t.width} clbits, program has {p.clbit_count}")
        if t.input is not None and len(t.input) != p.qubit_count:
            raise SuiteShapeMismatch(
                f"test {t.name!r} input has {len(t.input)} bits, program has {p.qubit_count} qubits")


def run_suite(p: Program, suite: Sequence[TestCase], budget: float | None = DEFAULT_BUDGET,
              max_branches: int = DEFAULT_MAX_BRANCHES) -> tuple[Verdict, ...]:
    """One verdict per test; all distinct inputs are simulated in one batch."""
    check_suite_shape(p, suite)
    opts = RunOptions(max_branches=max_branches, budget=budget)
    inputs = list(dict.fromkeys(t.input for t in suite))
    try:
        outcomes = dict(zip(inputs, run_batch(p, inputs, opts)))
    except SimulationError:
        # rerun input by input so that each test gets its own error
        outcomes = {}
        for bits in inputs:
            try:
                outcomes[bits] = run_batch(p, [bits], opts)[0]
            except BudgetExceeded as exc:
                outcomes[bits] = Verdict(TIMEOUT, message=str(exc))
            except SimulationError as exc:
                outcomes[bits] = Verdict(ERROR, message=f"{type(exc).__name__}: {exc}")
    verdicts = []
    for t in suite:
        res = outcomes[t.input]
        if isinstance(res, Verdict):
            verdicts.append(res)
            continue
        d = tvd(res.distribution, t.expected)
        verdicts.append(Verdict(PASS if d <= t.tolerance else FAIL, res.covered, d))
    return tuple(verdicts)


@dataclass(frozen=True)
class ExecutionMatrix:
    tests: tuple[str, ...]
    versions: tuple[str, ...]
    rows: dict[str, tuple[Verdict, ...]]

    @property
    def original(self) -> tuple[Verdict, ...]:
        return self.rows[ORIGINAL]

    def behavior_changing(self, version: str) -> bool:
        """True if some test flips between passing and not passing (timeouts excluded)."""
        for a, b in zip(self.original, self.rows[version]):
            if TIMEOUT in (a.status, b.status):
                continue
            if a.passed != b.passed:
                return True
        return False

    def has_timeout(self, version: str) -> bool:
        return any(v.status == TIMEOUT for v in self.rows[version])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["version", *self.tests])
        for ver in self.versions:
            w.writerow([ver, *(v.status for v in self.rows[ver])])
        return buf.getvalue()

    def to_json(self) -> str:
        rows = []
        for ver in self.versions:
            rows.append({
                "version": ver,
                "behavior_changing": ver != ORIGINAL and self.behavior_changing(ver),
                "cells": [
                    {"test": name, "verdict": v.status, "tvd": v.tvd, "covered": sorted(v.covered)}
                    for name, v in zip(self.tests, self.rows[ver])
                ],
            })
        return json.dumps({"tests": list(self.tests), "rows": rows}, indent=2) + "\n"


def _row_job(args) -> tuple[Verdict, ...]:
    program, suite, budget, max_branches = args
    return run_suite(program, suite, budget, max_branches)


def run_matrix(p: Program, mutants: Sequence[Mutant], suite: Sequence[TestCase],
               budget: float | None = DEFAULT_BUDGET, workers: int = 1,
               max_branches: int = DEFAULT_MAX_BRANCHES) -> ExecutionMatrix:
    """Run ``suite`` on ``p`` and on every mutant.  Content does not depend on ``workers``."""
    check_suite_shape(p, suite)
    jobs = [(p, suite, budget, max_branches)] + [(m.program, suite, budget, max_branches) for m in mutants]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_row_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_row_job(j) for j in jobs]
    versions = (ORIGINAL, *(m.id for m in mutants))
    return ExecutionMatrix(tuple(t.name for t in suite), versions, dict(zip(versions, results)))


def behavior_changing_counts(matrix: ExecutionMatrix, mutants: Iterable[Mutant]) -> dict[str, int]:
    """Behavior-changing mutants per operator code."""
    counts: dict[str, int] = {}
    for m in mutants:
        if matrix.behavior_changing(m.id):
            counts[m.operator.code] = counts.get(m.operator.code, 0) + 1
    return counts
