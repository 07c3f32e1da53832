import json
from importlib import resources

import pytest

from qfl.cli import EXIT_INPUT, EXIT_OK, EXIT_UNDEFINED, Config, UsageError, build_parser, config_from_args, main

DATA = resources.files("qfl") / "data"
L1 = DATA / "curated" / "ccx_wrong_operands"
BELL = DATA / "seeds" / "bell"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_check(capsys):
    code, out, _ = run(capsys, "check", BELL / "program.qasm", "--format", "json")
    assert code == EXIT_OK
    assert json.loads(out) == {"path": str(BELL / "program.qasm"), "statements": 4, "qubits": 2, "clbits": 2}


def test_check_reports_location(capsys, tmp_path):
    bad = tmp_path / "bad.qasm"
    bad.write_text("qreg q[1];\nh q[3];\n")
    code, _, err = run(capsys, "check", bad)
    assert code == EXIT_INPUT
    assert f"{bad}:2:" in err and "OperandOutOfRange" in err


def test_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "check", tmp_path / "nope.qasm")
    assert code == EXIT_INPUT and "nope.qasm" in err


def test_mutate(capsys, tmp_path):
    code, out, _ = run(capsys, "mutate", BELL / "program.qasm", "--ops", "QGD", "--format", "json",
                       "--out", tmp_path)
    assert code == EXIT_OK
    assert [m["id"] for m in json.loads(out)] == ["QGD-0-0", "QGD-1-0"]
    assert sorted(p.name for p in tmp_path.iterdir()) == ["QGD-0-0.qasm", "QGD-1-0.qasm"]


def test_mutate_bad_ops(capsys):
    code, _, err = run(capsys, "mutate", BELL / "program.qasm", "--ops", "NOPE")
    assert code == EXIT_INPUT and "NOPE" in err


def test_test_command(capsys):
    code, out, _ = run(capsys, "test", BELL / "program.qasm", BELL / "tests.json")
    assert code == EXIT_OK and out.strip().endswith("4/4 passed")


def test_suite_shape_error(capsys):
    code, _, err = run(capsys, "test", L1 / "buggy.qasm", BELL / "tests.json")
    assert code == EXIT_INPUT and "clbits" in err


def test_localize_wrong_ccx_operands(capsys, tmp_path):
    code, out, err = run(capsys, "localize", L1 / "buggy.qasm", L1 / "tests.json", "--sbfl",
                         "--reference", L1 / "reference.qasm", "--out", tmp_path)
    assert code == EXIT_OK
    rep = json.loads((tmp_path / "report_muse.json").read_text())
    top = rep["statements"][0]
    assert top["id"] == 2 and top["best_rank"] == 1 and top["worst_rank"] == 1
    for name in ("ochiai", "tarantula"):
        assert json.loads((tmp_path / f"report_{name}.json").read_text())["degenerate"] is True
    assert "warning" in err and "degenerate" in err
    assert "ccx q[0],q[1],q[2]; *" in out
    assert (tmp_path / "matrix.csv").read_text().startswith("version,test_output\noriginal,F\n")


def test_localize_passing_program(capsys, tmp_path):
    code, _, err = run(capsys, "localize", L1 / "reference.qasm", L1 / "tests.json", "--out", tmp_path)
    assert code == EXIT_UNDEFINED and "no failing tests" in err


def test_localize_faulty_ids(capsys, tmp_path):
    code, out, _ = run(capsys, "localize", L1 / "buggy.qasm", L1 / "tests.json", "--faulty", "2",
                       "--format", "json", "--out", tmp_path)
    assert code == EXIT_OK
    assert json.loads(out)[0]["exam_best"] == pytest.approx(100 / 7)


def test_inject_evaluate_compare(capsys, tmp_path):
    bench = tmp_path / "bench"
    code, out, _ = run(capsys, "inject", BELL / "program.qasm", BELL / "tests.json", "--out", bench,
                       "--ops", "QGD,QGR", "--prefix", "bell-")
    assert code == EXIT_OK
    n = len(list(bench.iterdir()))
    assert n > 2 and out.startswith(f"{n} items")
    res = tmp_path / "res"
    code, _, _ = run(capsys, "evaluate", bench, "--out", res, "--workers", "2")
    assert code == EXIT_OK
    rows = (res / "records.csv").read_text().splitlines()
    assert len(rows) == 1 + 3 * n
    code, out, _ = run(capsys, "compare", res / "records.csv", "--format", "json")
    assert code == EXIT_OK and "muse_vs_ochiai" in json.loads(out)
    code, out, _ = run(capsys, "evaluate", bench, "--out", tmp_path / "m", "--methods", "muse")
    assert json.loads((tmp_path / "m" / "stats.json").read_text())["comparisons"] == {}


def test_evaluate_empty_dir(capsys, tmp_path):
    code, _, err = run(capsys, "evaluate", tmp_path)
    assert code == EXIT_INPUT and "no valid benchmark items" in err


def test_evaluate_skips_invalid_items(capsys, tmp_path):
    (tmp_path / "broken").mkdir()
    code, _, err = run(capsys, "inject", BELL / "program.qasm", BELL / "tests.json", "--out", tmp_path,
                       "--ops", "QGD")
    code, _, err = run(capsys, "evaluate", tmp_path, "--out", tmp_path / "res", "--methods", "muse")
    assert code == EXIT_OK and "skipping" in err and "broken" in err


def test_workers_env(monkeypatch, capsys, tmp_path):
    monkeypatch.setenv("QFL_WORKERS", "3")
    args = build_parser().parse_args(["evaluate", str(tmp_path)])
    assert config_from_args(args).workers == 3
    args = build_parser().parse_args(["evaluate", str(tmp_path), "--workers", "2"])
    assert config_from_args(args).workers == 2
    monkeypatch.setenv("QFL_WORKERS", "many")
    code, _, err = run(capsys, "evaluate", tmp_path)
    assert code == EXIT_INPUT and "QFL_WORKERS" in err


def test_config_validation(tmp_path):
    with pytest.raises(UsageError):
        Config(budget=0)
    with pytest.raises(UsageError):
        Config(format="xml")
    with pytest.raises(ValueError):
        Config(ops=("BAD",))
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"ops": "QGD,QIH*", "budget_preset": "hour", "workers": 2}))
    cfg = Config.from_file(path)
    assert cfg.ops == ("QGD", "QIH") and cfg.budget == 3600.0 and cfg.workers == 2
    path.write_text(json.dumps({"colour": "red"}))
    with pytest.raises(UsageError):
        Config.from_file(path)


def test_config_file_with_flag_override(capsys, tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"ops": "QGR", "format": "json"}))
    code, out, _ = run(capsys, "mutate", BELL / "program.qasm", "--config", path)
    assert {m["operator"] for m in json.loads(out)} == {"QGR"}
    code, out, _ = run(capsys, "mutate", BELL / "program.qasm", "--config", path, "--ops", "QMD")
    assert {m["operator"] for m in json.loads(out)} == {"QMD"}


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as info:
        main(["localize"])
    assert info.value.code == EXIT_INPUT
