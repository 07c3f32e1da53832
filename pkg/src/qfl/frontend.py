"""Parser, serializer and differ for a strict OpenQASM-2 subset.

Supported: ``qreg``/``creg`` declarations, applications of the catalog gates,
``measure``, ``barrier``, ``reset`` and ``if (creg==k)`` guards.  Statement ids
are assigned 0..N-1 in source order; comments and blank lines do not count.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Iterator, Union

from qfl.gates import GATES

GATE = "gate"
MEASURE = "measure"
BARRIER = "barrier"
RESET = "reset"
KINDS = (GATE, MEASURE, BARRIER, RESET)


class FrontendError(Exception):
    """Base class for program loading errors."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.message = message
        self.line = line
        self.column = column
        loc = ""
        if line is not None:
            loc = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(loc + message)


class QasmSyntaxError(FrontendError):
    pass


class UnknownGate(FrontendError):
    pass


class OperandOutOfRange(FrontendError):
    pass


class DuplicateQubitOperand(FrontendError):
    pass


class UnsupportedConstruct(FrontendError):
    pass


class EmptyDiff(FrontendError):
    """Buggy and reference programs have identical statements."""


class ParamEvaluationError(ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# parameter expressions

@dataclass(frozen=True)
class Num:
    value: Union[int, float]

    def evaluate(self) -> float:
        return float(self.value)


@dataclass(frozen=True)
class Pi:
    def evaluate(self) -> float:
        return math.pi


@dataclass(frozen=True)
class Neg:
    operand: "ParamExpr"

    def evaluate(self) -> float:
        return -self.operand.evaluate()


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "ParamExpr"
    right: "ParamExpr"

    def evaluate(self) -> float:
        a = self.left.evaluate()
        b = self.right.evaluate()
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if b == 0:
            raise ParamEvaluationError("division by zero in gate parameter")
        return a / b


ParamExpr = Union[Num, Pi, Neg, BinOp]

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def format_number(value: Union[int, float]) -> str:
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def format_expr(e: ParamExpr) -> str:
    if isinstance(e, Num):
        return format_number(e.value)
    if isinstance(e, Pi):
        return "pi"
    if isinstance(e, Neg):
        inner = format_expr(e.operand)
        if isinstance(e.operand, BinOp):
            inner = f"({inner})"
        return "-" + inner
    prec = _PREC[e.op]
    left = format_expr(e.left)
    right = format_expr(e.right)
    # parenthesize so that parsing restores the same tree (operators are left-associative)
    if isinstance(e.left, BinOp) and _PREC[e.left.op] < prec:
        left = f"({left})"
    if isinstance(e.right, BinOp) and _PREC[e.right.op] <= prec:
        right = f"({right})"
    return f"{left}{e.op}{right}"


# ---------------------------------------------------------------------------
# program model

Operand = tuple[str, int]


@dataclass(frozen=True)
class Statement:
    id: int
    kind: str
    gate: str | None = None
    qubits: tuple[Operand, ...] = ()
    clbits: tuple[Operand, ...] = ()
    params: tuple[ParamExpr, ...] = ()
    guard: tuple[str, int] | None = None
    line: int = field(default=0, compare=False)

    def text(self) -> str:
        """Canonical source text of the statement, independent of its id."""
        args = ",".join(f"{r}[{i}]" for r, i in self.qubits)
        if self.kind == GATE:
            body = self.gate
            if self.params:
                body += "(" + ",".join(format_expr(p) for p in self.params) + ")"
            body += " " + args
        elif self.kind == MEASURE:
            (qr, qi), (cr, ci) = self.qubits[0], self.clbits[0]
            body = f"measure {qr}[{qi}] -> {cr}[{ci}]"
        elif self.kind == BARRIER:
            body = "barrier " + args
        else:
            body = "reset " + args
        if self.guard is not None:
            body = f"if ({self.guard[0]}=={self.guard[1]}) " + body
        return body + ";"


@dataclass(frozen=True)
class Program:
    qregs: tuple[tuple[str, int], ...]
    cregs: tuple[tuple[str, int], ...]
    statements: tuple[Statement, ...]
    source_path: str | None = field(default=None, compare=False)

    @property
    def qubit_count(self) -> int:
        return sum(n for _, n in self.qregs)

    @property
    def clbit_count(self) -> int:
        return sum(n for _, n in self.cregs)

    def __len__(self) -> int:
        return len(self.statements)

    def qubit_index(self, operand: Operand) -> int:
        return _flat_index(self.qregs, operand)

    def clbit_index(self, operand: Operand) -> int:
        return _flat_index(self.cregs, operand)

    def creg_span(self, name: str) -> tuple[int, int]:
        """(offset, size) of a classical register in the flat clbit vector."""
        off = 0
        for r, n in self.cregs:
            if r == name:
                return off, n
            off += n
        raise KeyError(name)

    def with_statements(self, statements) -> "Program":
        """Copy with a new statement list; ids are renumbered in order."""
        stmts = tuple(replace(s, id=i) for i, s in enumerate(statements))
        return replace(self, statements=stmts)

    def replace_statement(self, sid: int, new: Statement) -> "Program":
        stmts = list(self.statements)
        stmts[sid] = replace(new, id=sid, line=self.statements[sid].line)
        return replace(self, statements=tuple(stmts))

    def delete_statement(self, sid: int) -> "Program":
        return self.with_statements(s for s in self.statements if s.id != sid)


def _flat_index(regs, operand: Operand) -> int:
    name, idx = operand
    off = 0
    for r, n in regs:
        if r == name:
            return off + idx
        off += n
    raise KeyError(name)


# ---------------------------------------------------------------------------
# lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<str>"[^"\n]*")
  | (?P<op>->|==|[\[\]();,+\-*/{}])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(source: str) -> Iterator[_Tok]:
    line, line_start, pos = 1, 0, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise QasmSyntaxError(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            yield _Tok(kind, m.group(), line, m.start() - line_start + 1)
        pos = m.end()
    yield _Tok("eof", "", line, pos - line_start + 1)


# ---------------------------------------------------------------------------
# parser

class _Parser:
    def __init__(self, source: str):
        self.toks = list(_tokenize(source))
        self.pos = 0
        self.qregs: dict[str, int] = {}
        self.cregs: dict[str, int] = {}
        self.statements: list[Statement] = []

    @property
    def tok(self) -> _Tok:
        return self.toks[self.pos]

    def advance(self) -> _Tok:
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def error(self, msg: str, tok: _Tok | None = None) -> QasmSyntaxError:
        tok = tok or self.tok
        return QasmSyntaxError(msg, tok.line, tok.col)

    def expect(self, text: str) -> _Tok:
        if self.tok.text != text or self.tok.kind == "str":
            shown = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {shown!r}")
        return self.advance()

    def expect_id(self) -> _Tok:
        if self.tok.kind != "id":
            raise self.error(f"expected identifier, found {self.tok.text or 'end of input'!r}")
        return self.advance()

    def expect_int(self) -> int:
        t = self.tok
        if t.kind != "num" or not t.text.isdigit():
            raise self.error(f"expected integer, found {t.text or 'end of input'!r}")
        self.advance()
        return int(t.text)

    # -- top level

    def parse(self) -> Program:
        self._header()
        while self.tok.kind != "eof":
            self._item()
        return Program(tuple(self.qregs.items()), tuple(self.cregs.items()), tuple(self.statements))

    def _header(self) -> None:
        if self.tok.text == "OPENQASM":
            t = self.advance()
            version = self.tok.text
            self.advance()
            if version not in ("2.0", "2"):
                raise UnsupportedConstruct(f"OPENQASM {version} is not supported", t.line, t.col)
            self.expect(";")
        if self.tok.text == "include":
            t = self.advance()
            name = self.tok
            if name.kind != "str":
                raise self.error("expected include file name")
            self.advance()
            if name.text != '"qelib1.inc"':
                raise UnsupportedConstruct(f"include {name.text} is not supported", t.line, t.col)
            self.expect(";")

    def _item(self) -> None:
        t = self.tok
        if t.kind != "id":
            raise self.error(f"unexpected {t.text!r}")
        if t.text in ("qreg", "creg"):
            self._decl()
            return
        if t.text in ("gate", "opaque", "include", "OPENQASM", "for", "while", "def"):
            raise UnsupportedConstruct(f"'{t.text}' is not supported", t.line, t.col)
        self._statement()

    def _decl(self) -> None:
        kw = self.advance()
        name = self.expect_id()
        if name.text in self.qregs or name.text in self.cregs:
            raise self.error(f"register {name.text!r} already declared", name)
        if name.text in GATES or name.text in ("measure", "barrier", "reset", "if", "pi"):
            raise self.error(f"{name.text!r} is a reserved word", name)
        self.expect("[")
        size = self.expect_int()
        self.expect("]")
        self.expect(";")
        (self.qregs if kw.text == "qreg" else self.cregs)[name.text] = size

    def _statement(self) -> None:
        start = self.tok
        guard = None
        if start.text == "if":
            self.advance()
            self.expect("(")
            reg = self.expect_id()
            if reg.text not in self.cregs:
                raise self.error(f"guard on undeclared classical register {reg.text!r}", reg)
            self.expect("==")
            value = self.expect_int()
            self.expect(")")
            if value >= 2 ** self.cregs[reg.text]:
                raise OperandOutOfRange(
                    f"guard constant {value} does not fit in {reg.text}[{self.cregs[reg.text]}]",
                    reg.line, reg.col)
            guard = (reg.text, value)
        head = self.expect_id()
        sid = len(self.statements)
        if head.text == "measure":
            q = self._arg(self.qregs, "quantum")
            self.expect("->")
            c = self._arg(self.cregs, "classical")
            stmt = Statement(sid, MEASURE, qubits=(q,), clbits=(c,), guard=guard, line=start.line)
        elif head.text == "barrier":
            if guard is not None:
                raise UnsupportedConstruct("guarded barrier", start.line, start.col)
            qubits = self._arglist(allow_whole=True)
            stmt = Statement(sid, BARRIER, qubits=qubits, line=start.line)
        elif head.text == "reset":
            q = self._arg(self.qregs, "quantum")
            stmt = Statement(sid, RESET, qubits=(q,), guard=guard, line=start.line)
        else:
            spec = GATES.get(head.text)
            if spec is None:
                raise UnknownGate(f"unknown gate {head.text!r}", head.line, head.col)
            params: list[ParamExpr] = []
            if self.tok.text == "(":
                self.advance()
                params.append(self._expr())
                while self.tok.text == ",":
                    self.advance()
                    params.append(self._expr())
                self.expect(")")
            if len(params) != spec.param_count:
                raise self.error(
                    f"gate {head.text} takes {spec.param_count} parameter(s), got {len(params)}", head)
            qubits = self._arglist(allow_whole=False)
            if len(qubits) != spec.arity:
                raise self.error(f"gate {head.text} acts on {spec.arity} qubit(s), got {len(qubits)}", head)
            stmt = Statement(sid, GATE, gate=head.text, qubits=qubits, params=tuple(params),
                             guard=guard, line=start.line)
        self.expect(";")
        if len(set(stmt.qubits)) != len(stmt.qubits):
            raise DuplicateQubitOperand("qubit operands of one statement must be distinct",
                                        start.line, start.col)
        self.statements.append(stmt)

    def _arglist(self, allow_whole: bool) -> tuple[Operand, ...]:
        out = list(self._args_one(allow_whole))
        while self.tok.text == ",":
            self.advance()
            out.extend(self._args_one(allow_whole))
        return tuple(out)

    def _args_one(self, allow_whole: bool) -> list[Operand]:
        if allow_whole and self.tok.kind == "id" and self.toks[self.pos + 1].text != "[":
            name = self.expect_id()
            if name.text not in self.qregs:
                raise self.error(f"undeclared quantum register {name.text!r}", name)
            return [(name.text, i) for i in range(self.qregs[name.text])]
        return [self._arg(self.qregs, "quantum")]

    def _arg(self, regs: dict[str, int], what: str) -> Operand:
        name = self.expect_id()
        if name.text not in regs:
            raise self.error(f"undeclared {what} register {name.text!r}", name)
        if self.tok.text != "[":
            raise UnsupportedConstruct("whole-register operands are only allowed in barrier",
                                       name.line, name.col)
        self.expect("[")
        idx_tok = self.tok
        idx = self.expect_int()
        self.expect("]")
        if idx >= regs[name.text]:
            raise OperandOutOfRange(
                f"index {idx} out of range for {name.text}[{regs[name.text]}]", idx_tok.line, idx_tok.col)
        return (name.text, idx)

    # -- expressions: expr := term (("+"|"-") term)*; term := unary (("*"|"/") unary)*

    def _expr(self) -> ParamExpr:
        node = self._term()
        while self.tok.text in ("+", "-"):
            op = self.advance().text
            node = BinOp(op, node, self._term())
        return node

    def _term(self) -> ParamExpr:
        node = self._unary()
        while self.tok.text in ("*", "/"):
            op = self.advance().text
            node = BinOp(op, node, self._unary())
        return node

    def _unary(self) -> ParamExpr:
        if self.tok.text == "-":
            self.advance()
            return Neg(self._unary())
        return self._atom()

    def _atom(self) -> ParamExpr:
        t = self.tok
        if t.kind == "num":
            self.advance()
            if t.text.isdigit():
                return Num(int(t.text))
            return Num(float(t.text))
        if t.kind == "id" and t.text == "pi":
            self.advance()
            return Pi()
        if t.text == "(":
            self.advance()
            node = self._expr()
            self.expect(")")
            return node
        raise self.error(f"unexpected {t.text or 'end of input'!r} in parameter expression")


def parse(source: str, source_path: str | None = None) -> Program:
    """Parse program text.  Raises a :class:`FrontendError` subclass on bad input."""
    prog = _Parser(source).parse()
    if source_path is not None:
        prog = replace(prog, source_path=source_path)
    return prog


def load(path) -> Program:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read(), str(path))


def serialize(p: Program) -> str:
    lines = [f"qreg {n}[{k}];" for n, k in p.qregs]
    lines += [f"creg {n}[{k}];" for n, k in p.cregs]
    lines += [s.text() for s in p.statements]
    return "\n".join(lines) + "\n"


def validate(p: Program) -> None:
    """Re-check the structural invariants of a programmatically built Program."""
    qregs, cregs = dict(p.qregs), dict(p.cregs)
    for i, s in enumerate(p.statements):
        if s.id != i:
            raise FrontendError(f"statement ids out of order at position {i}")
        if s.kind not in KINDS:
            raise UnsupportedConstruct(f"unknown statement kind {s.kind!r}", s.line)
        for reg, idx in s.qubits:
            if reg not in qregs or not 0 <= idx < qregs[reg]:
                raise OperandOutOfRange(f"qubit {reg}[{idx}] out of range", s.line)
        for reg, idx in s.clbits:
            if reg not in cregs or not 0 <= idx < cregs[reg]:
                raise OperandOutOfRange(f"clbit {reg}[{idx}] out of range", s.line)
        if len(set(s.qubits)) != len(s.qubits):
            raise DuplicateQubitOperand("qubit operands of one statement must be distinct", s.line)
        if s.guard is not None:
            reg, k = s.guard
            if reg not in cregs or not 0 <= k < 2 ** cregs[reg]:
                raise OperandOutOfRange(f"guard {reg}=={k} out of range", s.line)
        if s.kind == GATE:
            spec = GATES.get(s.gate)
            if spec is None:
                raise UnknownGate(f"unknown gate {s.gate!r}", s.line)
            if len(s.qubits) != spec.arity or len(s.params) != spec.param_count:
                raise FrontendError(f"gate {s.gate} has wrong arity or parameter count", s.line)
        elif s.kind == MEASURE and (len(s.qubits) != 1 or len(s.clbits) != 1):
            raise FrontendError("measure takes one qubit and one clbit", s.line)


# ---------------------------------------------------------------------------
# ground truth

def _lcs_pairs(a: list[str], b: list[str]) -> list[tuple[int, int]]:
    n, m = len(a), len(b)
    table = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        for j in range(m - 1, -1, -1):
            if a[i] == b[j]:
                table[i][j] = table[i + 1][j + 1] + 1
            else:
                table[i][j] = max(table[i + 1][j], table[i][j + 1])
    pairs, i, j = [], 0, 0
    while i < n and j < m:
        if a[i] == b[j]:
            pairs.append((i, j))
            i += 1
            j += 1
        elif table[i + 1][j] >= table[i][j + 1]:
            i += 1
        else:
            j += 1
    return pairs


def diff_ground_truth(buggy: Program, reference: Program) -> set[int]:
    """Ids of buggy statements touched by a minimal line-level edit script.

    Modified or deleted lines yield their own id.  A hunk consisting only of
    lines inserted in the reference is attributed to the buggy statement just
    before it (statement 0 when the insertion is at the very start).
    """
    a = [s.text() for s in buggy.statements]
    b = [s.text() for s in reference.statements]
    if a == b:
        raise EmptyDiff("buggy and reference programs have identical statements")
    if not a:
        raise EmptyDiff("buggy program has no statements to blame")
    faulty: set[int] = set()
    prev_i, prev_j = -1, -1
    for i, j in _lcs_pairs(a, b) + [(len(a), len(b))]:
        deleted = range(prev_i + 1, i)
        inserted = j - prev_j - 1
        if deleted:
            faulty.update(deleted)
        elif inserted:
            faulty.add(max(prev_i, 0))
        prev_i, prev_j = i, j
    return faulty
