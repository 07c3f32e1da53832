"""Regenerate the seed programs and curated pattern faults under src/qfl/data.

Expected distributions are read off the reference programs with the exact
simulator and rounded to 12 decimals.  Run from the repository root:

    python tools/make_fixtures.py
"""
from __future__ import annotations

import json
from pathlib import Path

from qfl.frontend import diff_ground_truth, parse
from qfl.runner import TestCase, dump_suite, run_suite
from qfl.simulator import run

DATA = Path(__file__).resolve().parents[1] / "src" / "qfl" / "data"


def cp(half: str, c: str, t: str) -> str:
    """Controlled phase of angle 2*half written with p and cx only."""
    neg = half[1:] if half.startswith("-") else "-" + half
    return f"p({half}) {c};\ncx {c},{t};\np({neg}) {t};\ncx {c},{t};\np({half}) {t};\n"


BELL = """\
qreg q[2];
creg c[2];
h q[0];
cx q[0],q[1];
measure q[0] -> c[0];
measure q[1] -> c[1];
"""

GHZ3 = """\
qreg q[3];
creg c[3];
h q[0];
cx q[0],q[1];
cx q[1],q[2];
measure q[0] -> c[0];
measure q[1] -> c[1];
measure q[2] -> c[2];
"""

TELEPORT = """\
// teleport ry(pi/3)|q0> onto q2
qreg q[3];
creg m0[1];
creg m1[1];
creg out[1];
ry(pi/3) q[0];
h q[1];
cx q[1],q[2];
cx q[0],q[1];
h q[0];
measure q[0] -> m0[0];
measure q[1] -> m1[0];
if (m1==1) x q[2];
if (m0==1) z q[2];
measure q[2] -> out[0];
"""

QFT3 = (
    "// 3-qubit QFT followed by its inverse; the output equals the input\n"
    "qreg q[3];\ncreg c[3];\n"
    "h q[2];\n" + cp("pi/4", "q[1]", "q[2]") + cp("pi/8", "q[0]", "q[2]")
    + "h q[1];\n" + cp("pi/4", "q[0]", "q[1]") + "h q[0];\nswap q[0],q[2];\n"
    + "// inverse\n"
    + "swap q[0],q[2];\nh q[0];\n" + cp("-pi/4", "q[0]", "q[1]") + "h q[1];\n"
    + cp("-pi/8", "q[0]", "q[2]") + cp("-pi/4", "q[1]", "q[2]") + "h q[2];\n"
    + "measure q[0] -> c[0];\nmeasure q[1] -> c[1];\nmeasure q[2] -> c[2];\n"
)

GROVER2 = """\
// one Grover iteration on 2 qubits, oracle marks |11>
qreg q[2];
creg c[2];
h q[0];
h q[1];
cz q[0],q[1];
h q[0];
h q[1];
x q[0];
x q[1];
cz q[0],q[1];
x q[0];
x q[1];
h q[0];
h q[1];
measure q[0] -> c[0];
measure q[1] -> c[1];
"""

SEEDS = {
    "bell": (BELL, ["00", "01", "10", "11"]),
    "ghz3": (GHZ3, ["000", "001", "010", "100"]),
    "teleport": (TELEPORT, ["000", "001"]),
    "qft3": (QFT3, ["000", "001", "011", "101", "110"]),
    "grover2": (GROVER2, ["00", "01", "10"]),
}


def _drop(text: str, line: str, count: int = 1) -> str:
    assert line in text, line
    return text.replace(line, "", count)


CCX_REF = """\
qreg q[3];
creg c[3];
x q[0];
x q[1];
ccx q[0],q[2],q[1];
cx q[2],q[1];
measure q[0] -> c[0];
measure q[1] -> c[1];
measure q[2] -> c[2];
"""

HLAYER_REF = """\
qreg q[4];
creg c[4];
h q[0];
h q[1];
h q[2];
h q[3];
cx q[3],q[1];
cx q[1],q[0];
cx q[0],q[1];
ccx q[3],q[2],q[1];
cx q[1],q[2];
cx q[3],q[2];
measure q[0] -> c[0];
"""

GROVER01_REF = GROVER2.replace("oracle marks |11>", "oracle marks |01>").replace(
    "h q[1];\ncz q[0],q[1];\nh q[0];", "h q[1];\nx q[1];\ncz q[0],q[1];\nx q[1];\nh q[0];", 1)

# name -> (reference, buggy, pattern, test inputs; None means one test from |0...0>)
CURATED = {
    "ccx_wrong_operands": (
        CCX_REF, CCX_REF.replace("ccx q[0],q[2],q[1];", "ccx q[0],q[1],q[2];"),
        "wrong gate operands", None),
    "missing_h_layer": (
        HLAYER_REF, HLAYER_REF.replace("h q[0];\nh q[1];\nh q[2];\nh q[3];\n", ""),
        "missing initialization", None),
    "bell_missing_h": (BELL, _drop(BELL, "h q[0];\n"), "missing initialization", None),
    "bell_reversed_cx": (BELL, BELL.replace("cx q[0],q[1];", "cx q[1],q[0];"), "wrong gate operands", None),
    "bell_missing_measure": (BELL, _drop(BELL, "measure q[1] -> c[1];\n"), "missing measurement", None),
    "ghz3_missing_cx": (GHZ3, _drop(GHZ3, "cx q[1],q[2];\n"), "missing gate", None),
    "teleport_missing_correction": (
        TELEPORT, _drop(TELEPORT, "if (m1==1) x q[2];\n"), "missing gate", ["000", "001"]),
    "teleport_wrong_measured_qubit": (
        TELEPORT, TELEPORT.replace("measure q[2] -> out[0];", "measure q[1] -> out[0];"),
        "wrong gate operands", ["000", "001"]),
    "grover2_missing_diffusion_h": (
        GROVER2, GROVER2.replace("x q[1];\nh q[0];\nh q[1];\nmeasure", "x q[1];\nmeasure"),
        "missing gate", None),
    "grover2_missing_oracle_x": (
        GROVER01_REF, GROVER01_REF.replace("x q[1];\ncz q[0],q[1];\nx q[1];", "cz q[0],q[1];", 1),
        "missing gate", None),
}


def _expected(program, initial):
    dist = run(program, initial=initial).distribution
    dist = {k: round(v, 12) for k, v in dist.items() if round(v, 12) > 0}
    return dist


def make_suite(program, inputs) -> list[TestCase]:
    if inputs is None:
        return [TestCase("test_output", _expected(program, None))]
    return [TestCase(f"test_input_{bits}", _expected(program, bits), input=bits) for bits in inputs]


def main() -> None:
    for name, (text, inputs) in SEEDS.items():
        d = DATA / "seeds" / name
        d.mkdir(parents=True, exist_ok=True)
        prog = parse(text)
        (d / "program.qasm").write_text(text)
        suite = make_suite(prog, inputs)
        assert all(v.passed for v in run_suite(prog, suite))
        (d / "tests.json").write_text(dump_suite(suite))
    for name, (ref_text, bug_text, pattern, inputs) in CURATED.items():
        d = DATA / "curated" / name
        d.mkdir(parents=True, exist_ok=True)
        ref, bug = parse(ref_text), parse(bug_text)
        suite = make_suite(ref, inputs)
        assert all(v.passed for v in run_suite(ref, suite)), name
        assert any(v.status == "F" for v in run_suite(bug, suite)), name
        (d / "reference.qasm").write_text(ref_text)
        (d / "buggy.qasm").write_text(bug_text)
        (d / "tests.json").write_text(dump_suite(suite))
        meta = {"id": name, "origin": {"kind": "curated", "pattern": pattern},
                "ground_truth": sorted(diff_ground_truth(bug, ref))}
        (d / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        print(name, meta["ground_truth"])


if __name__ == "__main__":
    main()
