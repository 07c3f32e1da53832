"""First-order mutant generation for circuit programs."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Iterator

from qfl.frontend import (
    GATE, MEASURE, BinOp, Neg, Num, ParamExpr, Program, Statement, validate,
)
from qfl.gates import family_of

QUANTUM = "quantum"
CLASSICAL = "classical"


@dataclass(frozen=True)
class MutationOperator:
    code: str
    category: str
    description: str
    experimental: bool = False


OPERATORS: dict[str, MutationOperator] = {
    op.code: op
    for op in (
        MutationOperator("QGD", QUANTUM, "quantum gate deletion"),
        MutationOperator("QGR", QUANTUM, "quantum gate replacement within the same arity/parameter family"),
        MutationOperator("QMD", QUANTUM, "measurement deletion"),
        MutationOperator("CRP", CLASSICAL, "parameter constant replacement"),
        MutationOperator("AOR", CLASSICAL, "arithmetic operator replacement in gate parameters"),
        MutationOperator("GCR", CLASSICAL, "guard constant replacement"),
        MutationOperator("QIH", QUANTUM, "insert an h layer on every qubit at program start", True),
    )
}

DEFAULT_OPS = ("QGD", "QGR", "QMD", "CRP", "AOR", "GCR")
NO_TARGET = -1


def parse_ops(text: str | Iterable[str]) -> tuple[str, ...]:
    """Normalize a comma-separated operator list ("QGD,QGR" or "QIH*") to codes."""
    items = text.split(",") if isinstance(text, str) else list(text)
    codes = []
    for item in items:
        code = item.strip().upper().rstrip("*")
        if not code:
            continue
        if code not in OPERATORS:
            raise ValueError(f"unknown mutation operator {item.strip()!r}; known: {', '.join(OPERATORS)}")
        if code not in codes:
            codes.append(code)
    if not codes:
        raise ValueError("empty operator set")
    return tuple(codes)


@dataclass(frozen=True)
class Mutant:
    id: str
    operator: MutationOperator
    target_stmt: int
    payload: str
    program: Program

    @property
    def category(self) -> str:
        return self.operator.category


# -- parameter expression rewriting

def _rewrite_sites(e: ParamExpr, kind: type) -> Iterator[tuple[ParamExpr, callable]]:
    """Yield (node, rebuild) for every node of ``kind`` in pre-order.

    ``rebuild(new_node)`` returns the whole expression with that node replaced.
    """
    if isinstance(e, kind):
        yield e, lambda new: new
    if isinstance(e, Neg):
        for node, rebuild in _rewrite_sites(e.operand, kind):
            yield node, (lambda r: lambda new: Neg(r(new)))(rebuild)
    elif isinstance(e, BinOp):
        for node, rebuild in _rewrite_sites(e.left, kind):
            yield node, (lambda r: lambda new: replace(e, left=r(new)))(rebuild)
        for node, rebuild in _rewrite_sites(e.right, kind):
            yield node, (lambda r: lambda new: replace(e, right=r(new)))(rebuild)


def _constant_variants(c) -> list[ParamExpr]:
    out: list[ParamExpr] = []
    seen = {float(c)}
    for value in (0, 1, -c, c + 1):
        if float(value) in seen:
            continue
        seen.add(float(value))
        out.append(Neg(Num(-value)) if value < 0 else Num(value))
    return out


_AOR_SWAP = {"+": "-", "-": "+", "*": "/", "/": "*"}


def _param_mutations(stmt: Statement, code: str) -> Iterator[tuple[str, Statement]]:
    for pi, expr in enumerate(stmt.params):
        kind = Num if code == "CRP" else BinOp
        for node, rebuild in _rewrite_sites(expr, kind):
            if code == "CRP":
                replacements = [(f"{node.value} -> {r}", r) for r in _constant_variants(node.value)]
            else:
                new_op = _AOR_SWAP[node.op]
                replacements = [(f"{node.op} -> {new_op}", replace(node, op=new_op))]
            for label, new_node in replacements:
                params = list(stmt.params)
                params[pi] = rebuild(new_node)
                yield f"param {pi}: {label}", replace(stmt, params=tuple(params))


def _statement_mutations(p: Program, stmt: Statement, code: str) -> Iterator[tuple[str, Program]]:
    if code == "QGD" and stmt.kind == GATE:
        yield f"delete {stmt.gate}", p.delete_statement(stmt.id)
    elif code == "QMD" and stmt.kind == MEASURE:
        yield "delete measure", p.delete_statement(stmt.id)
    elif code == "QGR" and stmt.kind == GATE:
        for g in family_of(stmt.gate):
            if g != stmt.gate:
                yield f"{stmt.gate} -> {g}", p.replace_statement(stmt.id, replace(stmt, gate=g))
    elif code in ("CRP", "AOR") and stmt.kind == GATE:
        for label, new in _param_mutations(stmt, code):
            yield label, p.replace_statement(stmt.id, new)
    elif code == "GCR" and stmt.guard is not None:
        reg, k = stmt.guard
        size = dict(p.cregs)[reg]
        for value in range(2 ** size):
            if value != k:
                yield f"{reg}=={k} -> {reg}=={value}", p.replace_statement(
                    stmt.id, replace(stmt, guard=(reg, value)))


def _h_layer(p: Program) -> Program:
    layer = [Statement(0, GATE, gate="h", qubits=((reg, i),), line=0)
             for reg, size in p.qregs for i in range(size)]
    return p.with_statements(layer + list(p.statements))


def generate_mutants(p: Program, ops: Iterable[str] = DEFAULT_OPS) -> list[Mutant]:
    """All first-order mutants of ``p`` for the given operator codes.

    Ordered by (statement id, operator code, variant index); programs that
    coincide with an earlier mutant are dropped.
    """
    codes = sorted(parse_ops(ops))
    mutants: list[Mutant] = []
    seen: set[Program] = set()

    def add(code: str, target: int, variant: int, payload: str, prog: Program) -> None:
        if prog in seen:
            return
        validate(prog)
        seen.add(prog)
        mutants.append(Mutant(f"{code}-{target}-{variant}", OPERATORS[code], target, payload, prog))

    if "QIH" in codes and p.qubit_count:
        add("QIH", NO_TARGET, 0, "h layer on all qubits", _h_layer(p))
    for stmt in p.statements:
        for code in codes:
            if code == "QIH":
                continue
            for variant, (payload, prog) in enumerate(_statement_mutations(p, stmt, code)):
                add(code, stmt.id, variant, payload, prog)
    return mutants


def mut_of(mutants: Iterable[Mutant], s: int) -> list[Mutant]:
    """Mutants whose edit targets statement ``s``."""
    return [m for m in mutants if m.target_stmt == s]
