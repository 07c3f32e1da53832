import os

from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from qfl.frontend import BARRIER, GATE, MEASURE, RESET, BinOp, Neg, Num, Pi, Program, Statement
from qfl.gates import GATES

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=300, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

GATE_NAMES = sorted(GATES)

numbers = st.one_of(
    st.integers(0, 40).map(Num),
    st.floats(0, 50, allow_nan=False, allow_infinity=False).map(Num),
)
exprs = st.recursive(
    st.one_of(numbers, st.just(Pi())),
    lambda inner: st.one_of(
        inner.map(Neg),
        st.builds(BinOp, st.sampled_from("+-*/"), inner, inner),
    ),
    max_leaves=6,
)
safe_exprs = st.recursive(
    st.one_of(st.integers(0, 8).map(Num), st.just(Pi())),
    lambda inner: st.one_of(inner.map(Neg), st.builds(BinOp, st.sampled_from("+-*"), inner, inner)),
    max_leaves=4,
)


@st.composite
def programs(draw, max_qubits=4, max_statements=12, measure=True, guards=True, params=safe_exprs,
             kinds=(GATE, GATE, GATE, MEASURE, BARRIER, RESET)):
    """Random well-formed programs, built directly as objects."""
    n = draw(st.integers(1, max_qubits))
    if n > 1 and draw(st.booleans()):
        k = draw(st.integers(1, n - 1))
        qregs = (("q", k), ("r", n - k))
    else:
        qregs = (("q", n),)
    cregs = (("c", draw(st.integers(1, 3))),)
    if draw(st.booleans()):
        cregs += (("d", 1),)
    qubits = [(name, i) for name, size in qregs for i in range(size)]
    clbits = [(name, i) for name, size in cregs for i in range(size)]
    if not measure:
        kinds = tuple(k for k in kinds if k not in (MEASURE, RESET))
    stmts = []
    for sid in range(draw(st.integers(0, max_statements))):
        kind = draw(st.sampled_from(kinds))
        guard = None
        if guards and kind != BARRIER and draw(st.integers(0, 4)) == 0:
            reg, size = draw(st.sampled_from(cregs))
            guard = (reg, draw(st.integers(0, 2 ** size - 1)))
        if kind == GATE:
            gate = draw(st.sampled_from([g for g in GATE_NAMES if GATES[g].arity <= n]))
            spec = GATES[gate]
            ops = tuple(draw(st.permutations(qubits))[: spec.arity])
            ps = tuple(draw(params) for _ in range(spec.param_count))
            stmts.append(Statement(sid, GATE, gate=gate, qubits=ops, params=ps, guard=guard))
        elif kind == MEASURE:
            stmts.append(Statement(sid, MEASURE, qubits=(draw(st.sampled_from(qubits)),),
                                   clbits=(draw(st.sampled_from(clbits)),), guard=guard))
        elif kind == BARRIER:
            k = draw(st.integers(1, n))
            stmts.append(Statement(sid, BARRIER, qubits=tuple(draw(st.permutations(qubits))[:k])))
        else:
            stmts.append(Statement(sid, RESET, qubits=(draw(st.sampled_from(qubits)),), guard=guard))
    return Program(qregs, cregs, tuple(stmts))


def pytest_terminal_summary(terminalreporter):
    from tests import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.LINES:
            terminalreporter.write_line(line)
