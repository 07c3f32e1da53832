"""Suspiciousness scoring (MUSE, Ochiai, Tarantula), tie-aware ranks and EXAM."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from qfl.frontend import Program
from qfl.mutate import Mutant
from qfl.runner import ERROR, FAIL, PASS, ExecutionMatrix

MUSE, OCHIAI, TARANTULA = "muse", "ochiai", "tarantula"
METHODS = (MUSE, OCHIAI, TARANTULA)
# scores equal to this many decimals share a rank
TIE_DECIMALS = 12


class NoFailingTests(ValueError):
    pass


class EmptyFaultSet(ValueError):
    pass


@dataclass(frozen=True)
class Spectrum:
    ef: dict[int, int]
    ep: dict[int, int]
    nf: dict[int, int]
    np: dict[int, int]
    total_failed: int
    total_passed: int

    @property
    def total(self) -> int:
        return self.total_failed + self.total_passed


def _failed(v) -> bool:
    # a crash counts as a failed test that covers nothing
    return v.status in (FAIL, ERROR)


def spectrum(matrix: ExecutionMatrix, p: Program) -> Spectrum:
    """Coverage spectrum of the original program's row; timed-out tests are left out."""
    row = [v for v in matrix.original if v.status in (PASS, FAIL, ERROR)]
    failed = [v for v in row if _failed(v)]
    passed = [v for v in row if v.status == PASS]
    ef, ep, nf, np_ = {}, {}, {}, {}
    for s in p.statements:
        ef[s.id] = sum(s.id in v.covered for v in failed)
        ep[s.id] = sum(s.id in v.covered for v in passed)
        nf[s.id] = len(failed) - ef[s.id]
        np_[s.id] = len(passed) - ep[s.id]
    return Spectrum(ef, ep, nf, np_, len(failed), len(passed))


def muse_scores(matrix: ExecutionMatrix, mutants: Sequence[Mutant], p: Program) -> dict[int, float]:
    """S(s) = mean over m in mut(s) of |f_P(s) & p_m| / |f_P(s)|.

    f_P(s) are the failing tests of the original that cover s, p_m the tests
    passing on mutant m.  Mutants with a timed-out cell are left out of mut(s).
    """
    original = matrix.original
    failing = [i for i, v in enumerate(original) if v.status == FAIL]
    if not failing:
        raise NoFailingTests("no failing tests: the original program passes its suite")
    by_stmt: dict[int, list[Mutant]] = {}
    for m in mutants:
        if matrix.has_timeout(m.id):
            continue
        by_stmt.setdefault(m.target_stmt, []).append(m)
    scores: dict[int, float] = {}
    for s in p.statements:
        f_ps = [i for i in failing if s.id in original[i].covered]
        muts = by_stmt.get(s.id, [])
        if not f_ps or not muts:
            scores[s.id] = 0.0
            continue
        total = Fraction(0)
        for m in muts:
            row = matrix.rows[m.id]
            total += Fraction(sum(row[i].passed for i in f_ps), len(f_ps))
        scores[s.id] = float(total / len(muts))
    return scores


def ochiai(ef: int, ep: int, nf: int, np: int) -> float:
    denom = math.sqrt((ef + nf) * (ef + ep))
    return ef / denom if ef and denom else 0.0


def tarantula(ef: int, ep: int, nf: int, np: int) -> float:
    if not ef:
        return 0.0
    fail_ratio = ef / (ef + nf)
    pass_ratio = ep / (ep + np) if ep + np else 0.0
    return fail_ratio / (fail_ratio + pass_ratio)


def _sbfl(spec: Spectrum, formula) -> dict[int, float]:
    return {s: formula(spec.ef[s], spec.ep[s], spec.nf[s], spec.np[s]) for s in spec.ef}


def ochiai_scores(spec: Spectrum) -> dict[int, float]:
    return _sbfl(spec, ochiai)


def tarantula_scores(spec: Spectrum) -> dict[int, float]:
    return _sbfl(spec, tarantula)


def is_degenerate(spec: Spectrum) -> bool:
    """SBFL has nothing to contrast: no passing or no failing tests, or a single test."""
    return spec.total_failed == 0 or spec.total_passed == 0 or spec.total <= 1


@dataclass(frozen=True)
class SuspiciousnessReport:
    method: str
    scores: dict[int, float]
    ranked: tuple[int, ...]
    best_rank: dict[int, int]
    worst_rank: dict[int, int]
    faulty: frozenset[int] | None
    exam_best: float | None
    exam_worst: float | None
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "degenerate": self.degenerate,
            "exam_best": self.exam_best,
            "exam_worst": self.exam_worst,
            "faulty": None if self.faulty is None else sorted(self.faulty),
            "statements": [
                {"id": s, "score": self.scores[s], "best_rank": self.best_rank[s],
                 "worst_rank": self.worst_rank[s]}
                for s in self.ranked
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def tie_ranks(scores: Mapping[int, float]) -> tuple[tuple[int, ...], dict[int, int], dict[int, int]]:
    """Descending order (id ascending within ties) and best/worst ranks per id."""
    key = {s: round(v, TIE_DECIMALS) for s, v in scores.items()}
    ranked = tuple(sorted(scores, key=lambda s: (-key[s], s)))
    best, worst = {}, {}
    i = 0
    while i < len(ranked):
        j = i
        while j < len(ranked) and key[ranked[j]] == key[ranked[i]]:
            j += 1
        for s in ranked[i:j]:
            best[s] = i + 1
            worst[s] = j
        i = j
    return ranked, best, worst


def rank_and_exam(scores: Mapping[int, float], p: Program, faulty, method: str = MUSE,
                  degenerate: bool = False) -> SuspiciousnessReport:
    """Rank every statement (unscored ones at 0) and compute best/worst EXAM.

    ``faulty=None`` means the ground truth is unknown: ranks are filled in and
    the EXAM fields stay ``None``.  With several faulty statements the best
    ranked one counts, separately for each scenario.
    """
    ids = {s.id for s in p.statements}
    full = {s: float(scores.get(s, 0.0)) for s in sorted(ids)}
    ranked, best, worst = tie_ranks(full)
    if faulty is None:
        return SuspiciousnessReport(method, full, ranked, best, worst, None, None, None, degenerate)
    faulty = frozenset(faulty)
    if not faulty:
        raise EmptyFaultSet("no faulty statements given")
    if not faulty <= ids:
        raise ValueError(f"faulty ids {sorted(faulty - ids)} are not statements of the program")
    n = len(ids)
    return SuspiciousnessReport(
        method=method,
        scores=full,
        ranked=ranked,
        best_rank=best,
        worst_rank=worst,
        faulty=faulty,
        exam_best=100.0 * min(best[s] for s in faulty) / n,
        exam_worst=100.0 * min(worst[s] for s in faulty) / n,
        degenerate=degenerate,
    )


def localize(matrix: ExecutionMatrix, mutants: Sequence[Mutant], p: Program, faulty,
             method: str) -> SuspiciousnessReport:
    if method == MUSE:
        return rank_and_exam(muse_scores(matrix, mutants, p), p, faulty, MUSE)
    spec = spectrum(matrix, p)
    if spec.total_failed == 0:
        raise NoFailingTests("no failing tests: the original program passes its suite")
    formula = {OCHIAI: ochiai_scores, TARANTULA: tarantula_scores}[method]
    return rank_and_exam(formula(spec), p, faulty, method, is_degenerate(spec))


def format_table(report: SuspiciousnessReport, p: Program) -> str:
    head = report.method
    if report.exam_best is not None:
        head += f"  EXAM best {report.exam_best:.2f}%  worst {report.exam_worst:.2f}%"
    lines = [head + ("  [degenerate]" if report.degenerate else "")]
    lines.append(f"{'id':>4} {'line':>5} {'score':>8} {'best':>5} {'worst':>5}  statement")
    for s in report.ranked:
        st = p.statements[s]
        mark = " *" if report.faulty and s in report.faulty else ""
        lines.append(f"{s:>4} {st.line:>5} {report.scores[s]:>8.4f} {report.best_rank[s]:>5} "
                     f"{report.worst_rank[s]:>5}  {st.text()}{mark}")
    return "\n".join(lines)
