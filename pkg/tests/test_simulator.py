import cmath
import json
import math
import random
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qfl.frontend import BARRIER, GATE, parse
from qfl.gates import GATE_FAMILIES, GATES, check_unitarity
from qfl.simulator import (
    BranchExplosion, BudgetExceeded, DivisionByZero, QubitCapExceeded, RunOptions, final_branches, run, run_batch,
    sample, statevector,
)
from tests.conftest import programs

GOLDEN = Path(__file__).parent / "golden"
SQ = 1 / math.sqrt(2)


# -- reference semantics written out by hand, one basis state at a time

HAND = {
    "id": [[1, 0], [0, 1]],
    "x": [[0, 1], [1, 0]],
    "y": [[0, -1j], [1j, 0]],
    "z": [[1, 0], [0, -1]],
    "h": [[SQ, SQ], [SQ, -SQ]],
    "s": [[1, 0], [0, 1j]],
    "sdg": [[1, 0], [0, -1j]],
    "t": [[1, 0], [0, cmath.exp(1j * math.pi / 4)]],
    "tdg": [[1, 0], [0, cmath.exp(-1j * math.pi / 4)]],
}


def hand_matrix(gate, params):
    if gate in HAND:
        return np.array(HAND[gate], dtype=complex)
    if gate in ("rx", "ry", "rz", "p"):
        (th,) = params
        c, s = math.cos(th / 2), math.sin(th / 2)
        return np.array({
            "rx": [[c, -1j * s], [-1j * s, c]],
            "ry": [[c, -s], [s, c]],
            "rz": [[cmath.exp(-1j * th / 2), 0], [0, cmath.exp(1j * th / 2)]],
            "p": [[1, 0], [0, cmath.exp(1j * th)]],
        }[gate], dtype=complex)
    raise KeyError(gate)


def oracle_apply(state, gate, params, targets):
    """Apply one gate by mapping each basis state; qubit k is bit k of the index."""
    out = np.zeros_like(state)
    for i, amp in enumerate(state):
        if amp == 0:
            continue
        bits = [(i >> q) & 1 for q in targets]
        if gate in ("cx", "ccx"):
            *ctrl, tgt = targets
            j = i ^ (1 << tgt) if all(bits[:-1]) else i
            out[j] += amp
        elif gate == "cz":
            out[i] += -amp if all(bits) else amp
        elif gate == "swap":
            a, b = targets
            j = i
            if bits[0] != bits[1]:
                j = i ^ (1 << a) ^ (1 << b)
            out[j] += amp
        elif gate == "cswap":
            c, a, b = targets
            j = i
            if bits[0] and bits[1] != bits[2]:
                j = i ^ (1 << a) ^ (1 << b)
            out[j] += amp
        else:
            u = hand_matrix(gate, params)
            (q,) = targets
            b = bits[0]
            for r in (0, 1):
                j = (i & ~(1 << q)) | (r << q)
                out[j] += u[r, b] * amp
    return out


def oracle_statevector(p, initial=None):
    n = p.qubit_count
    state = np.zeros(2 ** n, dtype=complex)
    state[int(initial, 2) if initial else 0] = 1
    for s in p.statements:
        if s.kind == GATE:
            state = oracle_apply(state, s.gate, [e.evaluate() for e in s.params],
                                 [p.qubit_index(q) for q in s.qubits])
    return state


def tvd(a, b):
    return 0.5 * sum(abs(a.get(k, 0) - b.get(k, 0)) for k in set(a) | set(b))


# -- gate catalog

def test_catalog_is_unitary():
    check_unitarity(atol=1e-12)
    for name, spec in GATES.items():
        u = spec.matrix(*([0.37] * spec.param_count))
        assert u.shape == (2 ** spec.arity,) * 2
        assert np.allclose(u.conj().T @ u, np.eye(len(u)), atol=1e-12)


def test_families_partition_catalog():
    names = [g for fam in GATE_FAMILIES for g in fam]
    assert sorted(names) == sorted(GATES)
    for fam in GATE_FAMILIES:
        assert len({(GATES[g].arity, GATES[g].param_count) for g in fam}) == 1


@pytest.mark.parametrize("gate", sorted(HAND) + ["rx", "ry", "rz", "p"])
def test_single_qubit_matrices_match_hand_forms(gate):
    params = [0.731] if GATES[gate].param_count else []
    assert np.allclose(GATES[gate].matrix(*params), hand_matrix(gate, params), atol=1e-14)


# -- exact distributions

def test_superposition():
    assert run(parse("qreg q[1]; creg c[1]; h q[0]; measure q[0] -> c[0];")).distribution == \
        pytest.approx({"0": 0.5, "1": 0.5}, abs=1e-15)


def test_bell():
    p = parse("qreg q[2]; creg c[2]; h q[0]; cx q[0],q[1]; measure q[0] -> c[0]; measure q[1] -> c[1];")
    assert tvd(run(p).distribution, {"00": 0.5, "11": 0.5}) < 1e-12


def test_bitstring_order_puts_clbit_zero_rightmost():
    p = parse("qreg q[2]; creg c[2]; x q[0]; measure q[0] -> c[0]; measure q[1] -> c[1];")
    assert run(p).distribution == {"01": 1.0}


def test_cx_control_is_first_operand():
    p = parse("qreg q[2]; creg c[2]; x q[1]; cx q[1],q[0]; measure q[0] -> c[0]; measure q[1] -> c[1];")
    assert run(p).distribution == {"11": 1.0}
    p = parse("qreg q[2]; creg c[2]; x q[0]; cx q[1],q[0]; measure q[0] -> c[0]; measure q[1] -> c[1];")
    assert run(p).distribution == {"01": 1.0}


def test_guard_on_untouched_clbit_is_false():
    p = parse("qreg q[2]; creg c[1]; x q[0]; if (c==1) x q[1]; measure q[0] -> c[0];")
    tr = run(p)
    assert tr.distribution == {"1": 1.0}
    assert tr.covered == {0, 2}


def test_guard_after_measurement_takes_branch():
    p = parse("qreg q[2]; creg c[2]; h q[0]; measure q[0] -> c[0]; if (c==1) x q[1]; measure q[1] -> c[1];")
    tr = run(p)
    assert tvd(tr.distribution, {"00": 0.5, "11": 0.5}) < 1e-12
    assert tr.covered == {0, 1, 2, 3}
    assert tr.branch_count == 2


def test_guard_compares_whole_register():
    p = parse("qreg q[3]; creg c[2]; x q[0]; measure q[0] -> c[0]; if (c==1) x q[2]; "
              "if (c==3) x q[1]; measure q[2] -> c[1];")
    tr = run(p)
    assert tr.distribution == {"11": 1.0}
    assert 3 not in tr.covered


def test_teleportation_moves_the_state():
    p = parse("""qreg q[3]; creg m0[1]; creg m1[1]; creg out[1];
        ry(pi/3) q[0]; h q[1]; cx q[1],q[2]; cx q[0],q[1]; h q[0];
        measure q[0] -> m0[0]; measure q[1] -> m1[0];
        if (m1==1) x q[2]; if (m0==1) z q[2]; measure q[2] -> out[0];""")
    dist = run(p).distribution
    p_one = sum(v for k, v in dist.items() if k[0] == "1")
    assert p_one == pytest.approx(math.sin(math.pi / 6) ** 2, abs=1e-12)


def test_reset_returns_qubit_to_zero_without_writing_clbits():
    p = parse("qreg q[1]; creg c[1]; h q[0]; reset q[0]; measure q[0] -> c[0];")
    assert run(p).distribution == pytest.approx({"0": 1.0}, abs=1e-12)


def test_initial_basis_state():
    p = parse("qreg q[3]; creg c[3]; measure q[0] -> c[0]; measure q[1] -> c[1]; measure q[2] -> c[2];")
    assert run(p, initial="110").distribution == {"110": 1.0}
    traces = run_batch(p, ["001", "100", None])
    assert [t.distribution for t in traces] == [{"001": 1.0}, {"100": 1.0}, {"000": 1.0}]


def test_statevector_of_bell():
    sv = statevector(parse("qreg q[2]; h q[0]; cx q[0],q[1];"))
    assert np.allclose(sv, [SQ, 0, 0, SQ], atol=1e-15)


def test_statevector_rejects_measurement():
    with pytest.raises(ValueError):
        statevector(parse("qreg q[1]; creg c[1]; measure q[0] -> c[0];"))


@settings(max_examples=150)
@given(programs(max_qubits=4, max_statements=15, measure=False, guards=False))
def test_gates_match_basis_state_oracle(p):
    assert np.allclose(statevector(p), oracle_statevector(p), atol=1e-10)


@settings(max_examples=100)
@given(programs(max_qubits=4, max_statements=12, measure=False, guards=False), st.data())
def test_deferred_measurement_equivalence(p, data):
    n = p.qubit_count
    init = data.draw(st.text("01", min_size=n, max_size=n))
    m = p.clbit_count
    k = min(n, m)
    text = "".join(s.text() + "\n" for s in p.statements)
    decls = "".join(f"qreg {r}[{s}];\n" for r, s in p.qregs) + "".join(f"creg {r}[{s}];\n" for r, s in p.cregs)
    qubits = [(r, i) for r, s in p.qregs for i in range(s)]
    clbits = [(r, i) for r, s in p.cregs for i in range(s)]
    meas = "".join(f"measure {qubits[i][0]}[{qubits[i][1]}] -> {clbits[i][0]}[{clbits[i][1]}];\n" for i in range(k))
    full = parse(decls + text + meas)
    amps = oracle_statevector(p, init)
    expected = {}
    for idx, a in enumerate(amps):
        bits = ["0"] * m
        for i in range(k):
            bits[m - 1 - i] = str((idx >> i) & 1)
        key = "".join(bits)
        expected[key] = expected.get(key, 0.0) + abs(a) ** 2
    expected = {key: v for key, v in expected.items() if v > 1e-15}
    assert tvd(run(full, initial=init).distribution, expected) < 1e-9


@settings(max_examples=100)
@given(programs(max_qubits=4, max_statements=15))
def test_weights_and_norms(p):
    branches = final_branches(p)
    assert sum(b.weight for b in branches) == pytest.approx(1.0, abs=1e-9)
    for b in branches:
        assert np.linalg.norm(b.amplitudes) == pytest.approx(1.0, abs=1e-9)
    tr = run(p)
    assert sum(tr.distribution.values()) == pytest.approx(1.0, abs=1e-9)
    assert tr.covered <= {s.id for s in p.statements}


@settings(max_examples=100)
@given(programs(max_qubits=3, max_statements=12))
def test_coverage_before_first_guard(p):
    first = next((s.id for s in p.statements if s.guard is not None), len(p))
    assert set(range(first)) <= run(p).covered


@settings(max_examples=100)
@given(programs(max_qubits=3, max_statements=12))
def test_barrier_and_id_are_no_ops(p):
    keep = [s for s in p.statements if not (s.kind == BARRIER or (s.kind == GATE and s.gate == "id"))]
    q = p.with_statements(keep)
    assert tvd(run(p).distribution, run(q).distribution) < 1e-12


def test_random_measurement_free_programs_keep_norm():
    rng = random.Random(11)
    names = sorted(GATES)
    for _ in range(200):
        n = rng.randint(1, 5)
        lines = [f"qreg q[{n}];"]
        for _ in range(rng.randint(1, 30)):
            g = rng.choice([x for x in names if GATES[x].arity <= n])
            qs = rng.sample(range(n), GATES[g].arity)
            ps = f"({rng.uniform(-7, 7)!r})" if GATES[g].param_count else ""
            lines.append(f"{g}{ps} " + ",".join(f"q[{i}]" for i in qs) + ";")
        (b,) = final_branches(parse("\n".join(lines)))
        assert np.linalg.norm(b.amplitudes) == pytest.approx(1.0, abs=1e-9)


# -- limits

def test_branch_explosion():
    src = "qreg q[4]; creg c[4];" + "".join(f"h q[{i}]; measure q[{i}] -> c[{i}];" for i in range(4))
    assert run(parse(src), RunOptions(max_branches=16)).branch_count == 16
    with pytest.raises(BranchExplosion):
        run(parse(src), RunOptions(max_branches=15))


def test_qubit_cap():
    with pytest.raises(QubitCapExceeded):
        run(parse("qreg q[5]; x q[0];"), RunOptions(qubit_cap=4))


def test_zero_budget():
    with pytest.raises(BudgetExceeded):
        run(parse("qreg q[1]; x q[0];"), RunOptions(budget=0))


def test_division_by_zero_at_run_time():
    with pytest.raises(DivisionByZero):
        run(parse("qreg q[1]; rz(1/0) q[0];"))


def test_large_register_uses_index_tables():
    # 8 qubits is past the dense-operator size; GHZ state must still come out exact
    n = 8
    src = f"qreg q[{n}]; creg c[{n}]; h q[0];" + "".join(f"cx q[{i}],q[{i + 1}];" for i in range(n - 1))
    src += "".join(f"measure q[{i}] -> c[{i}];" for i in range(n))
    assert tvd(run(parse(src)).distribution, {"0" * n: 0.5, "1" * n: 0.5}) < 1e-12


# -- shots

BELL = parse("qreg q[2]; creg c[2]; h q[0]; cx q[0],q[1]; measure q[0] -> c[0]; measure q[1] -> c[1];")


def test_point_mass_sampling():
    tr = run(parse("qreg q[1]; creg c[1]; measure q[0] -> c[0];"))
    assert sample(tr, 100, seed=3) == {"0": 100}


def test_sampling_is_deterministic_and_matches_golden():
    counts = sample(run(BELL), 1000, seed=7)
    assert counts == sample(run(BELL), 1000, seed=7)
    assert sum(counts.values()) == 1000 and set(counts) == {"00", "11"}
    golden = json.loads((GOLDEN / "bell_1000_seed7.json").read_text())
    assert counts == golden


def test_zero_shots_rejected():
    with pytest.raises(ValueError):
        sample(run(BELL), 0, seed=1)
