"""Exact statevector simulation with mid-circuit measurement and classical guards.

A run keeps a list of branches, one per measurement history.  Each branch
holds its classical bits, a normalized statevector and its probability
weight.  Measurement splits a branch in at most two; guards are evaluated per
branch.  No sampling happens during a run, so verdicts are deterministic.

Bit order follows the usual little-endian convention: qubit ``k`` (flat index
over all quantum registers) is bit ``k`` of the basis-state index, and
distribution keys print clbit 0 as the rightmost character.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from qfl.frontend import BARRIER, GATE, MEASURE, RESET, ParamEvaluationError, Program
from qfl.gates import GATES

DEFAULT_QUBIT_CAP = 16
DEFAULT_MAX_BRANCHES = 4096
# outcomes with less probability than this are dropped when a branch splits
PRUNE_PROB = 1e-14
NORM_ATOL = 1e-9
MAX_CLBITS = 62
# registers up to this size apply gates as cached dense matrices
DENSE_MAX_QUBITS = 6


class SimulationError(Exception):
    pass


class BranchExplosion(SimulationError):
    pass


class BudgetExceeded(SimulationError):
    pass


class DivisionByZero(SimulationError):
    pass


class QubitCapExceeded(SimulationError):
    pass


@dataclass(eq=False)
class Branch:
    clbits: tuple[int, ...]
    amplitudes: np.ndarray
    weight: float


@dataclass(frozen=True)
class ExecutionTrace:
    covered: frozenset[int]
    distribution: dict[str, float]
    branch_count: int
    elapsed: float = field(compare=False, default=0.0)


@dataclass(frozen=True)
class RunOptions:
    max_branches: int = DEFAULT_MAX_BRANCHES
    budget: float | None = None
    qubit_cap: int = DEFAULT_QUBIT_CAP


@lru_cache(maxsize=4096)
def _index_table(n: int, targets: tuple[int, ...]) -> np.ndarray:
    """Basis indices arranged as (2**k, 2**(n-k)); row r sets the targets to the bits of r.

    The first target is the most significant bit of r.
    """
    k = len(targets)
    rest = [q for q in range(n) if q not in targets]
    base = np.zeros(2 ** (n - k), dtype=np.intp)
    for j, q in enumerate(rest):
        base |= ((np.arange(2 ** (n - k)) >> j) & 1) << q
    offsets = np.zeros(2 ** k, dtype=np.intp)
    for j, q in enumerate(reversed(targets)):
        offsets |= ((np.arange(2 ** k) >> j) & 1) << q
    table = offsets[:, None] | base[None, :]
    table.setflags(write=False)
    return table


def apply_gate(state: np.ndarray, matrix: np.ndarray, targets, n: int) -> np.ndarray:
    """Apply ``matrix`` to the flat-index qubits ``targets`` (first target = most significant)."""
    table = _index_table(n, tuple(targets))
    out = state.copy()
    out[table] = matrix @ state[table]
    return out


@lru_cache(maxsize=65536)
def _dense_operator(gate: str, params: tuple[float, ...], targets: tuple[int, ...], n: int) -> np.ndarray:
    """Full 2**n x 2**n matrix of a gate; cheap to apply when n is small."""
    u = GATES[gate].matrix(*params)
    table = _index_table(n, targets)
    full = np.zeros((2 ** n, 2 ** n), dtype=complex)
    full[table[:, None, :], table[None, :, :]] = u[:, :, None]
    full.setflags(write=False)
    return full


@lru_cache(maxsize=256)
def _bit_mask(n: int, qubit: int) -> np.ndarray:
    mask = ((np.arange(2 ** n) >> qubit) & 1).astype(bool)
    mask.setflags(write=False)
    return mask


def basis_state(n: int, bits: str | None = None) -> np.ndarray:
    """|0...0>, or the basis state named by ``bits`` (qubit 0 rightmost)."""
    state = np.zeros(2 ** n, dtype=complex)
    index = 0
    if bits:
        if len(bits) != n or set(bits) - {"0", "1"}:
            raise ValueError(f"initial state {bits!r} is not a {n}-bit string")
        index = int(bits, 2)
    state[index] = 1.0
    return state


def _bitstring(packed: int, width: int) -> str:
    return format(packed, f"0{width}b") if width else ""


def _execute(p: Program, initials: Sequence[str | None], opts: RunOptions | None):
    # Branches of all inputs are columns of one amplitude matrix, so every
    # statement is a single vectorized update.  Each column carries the input
    # it came from, its packed classical bits and its probability weight.
    opts = opts or RunOptions()
    t0 = time.monotonic()
    n, m = p.qubit_count, p.clbit_count
    if n > opts.qubit_cap:
        raise QubitCapExceeded(f"{n} qubits exceeds the cap of {opts.qubit_cap}")
    if m > MAX_CLBITS:
        raise SimulationError(f"{m} classical bits exceed the supported {MAX_CLBITS}")
    if opts.budget is not None and opts.budget <= 0:
        raise BudgetExceeded("zero time budget")
    deadline = None if opts.budget is None else t0 + opts.budget
    spans = {name: p.creg_span(name) for name, _ in p.cregs}

    n_inputs = len(initials)
    amps = np.stack([basis_state(n, bits) for bits in initials], axis=1)
    tag = np.arange(n_inputs)
    clbits = np.zeros(n_inputs, dtype=np.int64)
    weight = np.ones(n_inputs)
    covered: list[set[int]] = [set() for _ in initials]
    # unguarded statements run in every input's branches
    covered_all: list[int] = []

    for stmt in p.statements:
        if deadline is not None and time.monotonic() > deadline:
            raise BudgetExceeded(f"budget of {opts.budget}s exceeded at statement {stmt.id}")
        if stmt.guard is None:
            active = None
            covered_all.append(stmt.id)
        else:
            off, size = spans[stmt.guard[0]]
            active = ((clbits >> off) & ((1 << size) - 1)) == stmt.guard[1]
            if not active.any():
                continue
            for t in np.unique(tag[active]):
                covered[t].add(stmt.id)
        targets = tuple(p.qubit_index(q) for q in stmt.qubits)

        if stmt.kind == GATE:
            try:
                params = tuple(e.evaluate() for e in stmt.params)
            except ParamEvaluationError as exc:
                raise DivisionByZero(f"statement {stmt.id} (line {stmt.line}): {exc}") from None
            cols = slice(None) if active is None else np.flatnonzero(active)
            if n <= DENSE_MAX_QUBITS:
                amps[:, cols] = _dense_operator(stmt.gate, params, targets, n) @ amps[:, cols]
            else:
                u = GATES[stmt.gate].matrix(*params)
                table = _index_table(n, targets)
                block = amps[:, cols]
                block[table] = np.tensordot(u, block[table], axes=(1, 0))
                amps[:, cols] = block

        elif stmt.kind in (MEASURE, RESET):
            q = targets[0]
            mask = _bit_mask(n, q)
            if active is None:
                active = np.ones(tag.size, dtype=bool)
            sub = amps[:, active]
            p1 = np.sum(np.abs(sub[mask]) ** 2, axis=0)
            parts = [(amps[:, ~active], tag[~active], clbits[~active], weight[~active])]
            for outcome, prob in ((0, 1.0 - p1), (1, p1)):
                sel = prob > PRUNE_PROB
                keep = mask if outcome else ~mask
                a = np.where(keep[:, None], sub[:, sel], 0) / np.sqrt(prob[sel])
                c = clbits[active][sel]
                if stmt.kind == MEASURE:
                    bit = p.clbit_index(stmt.clbits[0])
                    c = (c & ~(1 << bit)) | (outcome << bit)
                elif outcome:
                    a = a[np.arange(2 ** n) ^ (1 << q)]
                parts.append((a, tag[active][sel], c, weight[active][sel] * prob[sel]))
            amps = np.concatenate([x[0] for x in parts], axis=1)
            tag = np.concatenate([x[1] for x in parts])
            clbits = np.concatenate([x[2] for x in parts])
            weight = np.concatenate([x[3] for x in parts])
            largest = np.bincount(tag, minlength=n_inputs).max()
            if largest > opts.max_branches:
                raise BranchExplosion(f"{largest} branches exceed the limit of {opts.max_branches}")

    for c in covered:
        c.update(covered_all)
    return amps, tag, clbits, weight, covered, time.monotonic() - t0


def run_batch(p: Program, initials: Sequence[str | None], opts: RunOptions | None = None
              ) -> list[ExecutionTrace]:
    """Execute ``p`` once per initial basis state; one trace per entry of ``initials``."""
    amps, tag, clbits, weight, covered, elapsed = _execute(p, initials, opts)
    m = p.clbit_count
    traces = []
    for i in range(len(initials)):
        dist: dict[str, float] = {}
        for c, w in zip(clbits[tag == i], weight[tag == i]):
            key = _bitstring(int(c), m)
            dist[key] = dist.get(key, 0.0) + float(w)
        traces.append(ExecutionTrace(frozenset(covered[i]), dict(sorted(dist.items())),
                                     int(np.sum(tag == i)), elapsed))
    return traces


def run(p: Program, opts: RunOptions | None = None, initial: str | None = None) -> ExecutionTrace:
    """Execute ``p`` exactly and return coverage plus the distribution over clbits.

    ``initial`` optionally names a computational basis input state.
    """
    return run_batch(p, [initial], opts)[0]


def final_branches(p: Program, initial: str | None = None, opts: RunOptions | None = None) -> list[Branch]:
    """Branches left after the last statement, for inspecting norms and weights."""
    amps, _, clbits, weight, _, _ = _execute(p, [initial], opts)
    return [Branch(tuple((int(c) >> i) & 1 for i in range(p.clbit_count)), amps[:, j].copy(), float(w))
            for j, (c, w) in enumerate(zip(clbits, weight))]


def statevector(p: Program, initial: str | None = None) -> np.ndarray:
    """Final statevector of a measurement-free, guard-free program."""
    n = p.qubit_count
    state = basis_state(n, initial)
    for stmt in p.statements:
        if stmt.kind in (MEASURE, RESET) or stmt.guard is not None:
            raise ValueError("statevector() needs a program without measurement, reset or guards")
        if stmt.kind == GATE:
            u = GATES[stmt.gate].matrix(*[e.evaluate() for e in stmt.params])
            state = apply_gate(state, u, [p.qubit_index(q) for q in stmt.qubits], n)
    return state


def sample(trace: ExecutionTrace, shots: int, seed: int) -> dict[str, int]:
    """Multinomial shot counts drawn from the exact distribution of ``trace``."""
    if shots <= 0:
        raise ValueError("shots must be positive")
    keys = list(trace.distribution)
    probs = np.array([trace.distribution[k] for k in keys], dtype=float)
    probs = probs / probs.sum()
    counts = np.random.default_rng(seed).multinomial(shots, probs)
    return {k: int(c) for k, c in zip(keys, counts) if c > 0}
