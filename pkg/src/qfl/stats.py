"""Effect size and paired significance test used to compare localization methods."""
from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from typing import Sequence

EXACT_MAX_N = 25


class EmptyInput(ValueError):
    pass


class AllDifferencesZero(ValueError):
    pass


def cliffs_delta(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Cliff's delta: (#(x > y) - #(x < y)) / (|xs| |ys|) over all pairs.

    Counted by sorting ``ys`` once and bisecting, O((m + n) log n).
    """
    if not xs or not ys:
        raise EmptyInput("cliffs_delta needs two nonempty samples")
    ys_sorted = sorted(ys)
    greater = less = 0
    for x in xs:
        greater += bisect_left(ys_sorted, x)
        less += len(ys_sorted) - bisect_right(ys_sorted, x)
    return (greater - less) / (len(xs) * len(ys))


def average_ranks(values: Sequence[float]) -> list[float]:
    """1-based ranks with ties sharing the mean of their positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        for k in range(i, j + 1):
            ranks[order[k]] = (i + j + 2) / 2
        i = j + 1
    return ranks


def signed_rank_statistic(pairs: Sequence[tuple[float, float]]) -> tuple[float, list[float]]:
    """W+ (sum of ranks of positive a-b) and the ranks of the nonzero |a-b|."""
    diffs = [a - b for a, b in pairs if a != b]
    if not diffs:
        raise AllDifferencesZero("all paired differences are zero")
    ranks = average_ranks([abs(d) for d in diffs])
    w_plus = sum(r for d, r in zip(diffs, ranks) if d > 0)
    return w_plus, ranks


def _exact_lower_tail(w_plus: float, ranks: list[float]) -> float:
    # ranks are multiples of 1/2, so doubling makes them integers
    doubled = [int(round(2 * r)) for r in ranks]
    total = sum(doubled)
    counts = [0] * (total + 1)
    counts[0] = 1
    for r in doubled:
        for s in range(total, r - 1, -1):
            counts[s] += counts[s - r]
    target = int(round(2 * w_plus))
    return sum(counts[: target + 1]) / 2 ** len(doubled)


def _normal_lower_tail(w_plus: float, ranks: list[float]) -> float:
    n = len(ranks)
    mean = n * (n + 1) / 4
    ties: dict[float, int] = {}
    for r in ranks:
        ties[r] = ties.get(r, 0) + 1
    var = n * (n + 1) * (2 * n + 1) / 24 - sum(t ** 3 - t for t in ties.values()) / 48
    if var <= 0:
        return 1.0 if w_plus >= mean else 0.0
    z = (w_plus - mean + 0.5) / math.sqrt(var)
    return 0.5 * math.erfc(-z / math.sqrt(2))


def wilcoxon_one_sided(pairs: Sequence[tuple[float, float]]) -> float:
    """p-value of the signed-rank test for the alternative "a tends to be lower than b".

    Zero differences are dropped and tied |d| get average ranks.  The null
    distribution is enumerated exactly up to 25 nonzero pairs; above that a
    normal approximation with tie and continuity correction is used.
    """
    w_plus, ranks = signed_rank_statistic(pairs)
    if len(ranks) <= EXACT_MAX_N:
        return _exact_lower_tail(w_plus, ranks)
    return _normal_lower_tail(w_plus, ranks)
