import csv
import json
import subprocess
import sys

import pytest

from quasitree.cli import UsageError, load_config, main, resolve_config


def run_cli(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out


def report(out):
    return json.loads((out / "report.json").read_text())


# ---------------------------------------------------------------- exit status


def test_validate_chain_passes(tmp_path, capsys):
    code, out = run_cli(tmp_path, "validate", "--instance", "chain")
    assert code == 0
    doc = report(out)
    assert doc["failed"] is False
    assert set(doc["suites"]) == {"axioms", "theorem-main"}
    assert "axiom.triangle" in capsys.readouterr().out


def test_violating_table_exits_one(tmp_path):
    inst = tmp_path / "bad.json"
    inst.write_text(json.dumps({"xi": 1.0, "vertices": ["X", "Y", "Z"],
                                "dpi": {"Y": {"X|Z": 5}, "X": {"Y|Z": 5}}}))
    code, out = run_cli(tmp_path, "validate", "--instance", str(inst), "--suite", "axioms")
    assert code == 1
    assert report(out)["failed"] is True


@pytest.mark.parametrize("args", [
    ["validate", "--instance", "no-such-file.json"],
    ["validate", "--instance", "chain", "--suite", "everything"],
    ["validate", "--instance", "chain", "--K", "0.0001"],
])
def test_usage_errors_exit_two(tmp_path, args, capsys):
    code, _ = run_cli(tmp_path, *args)
    assert code == 2
    assert "quasitree: error:" in capsys.readouterr().err


def test_unknown_flag_exits_two(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["validate", "--frobnicate"])
    assert exc.value.code == 2


def test_module_entry_point(tmp_path):
    out = tmp_path / "m"
    res = subprocess.run([sys.executable, "-m", "quasitree", "validate", "--instance", "chain",
                          "--out", str(out)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert (out / "report.json").exists()


# ---------------------------------------------------------------- determinism


def test_reports_are_byte_identical(tmp_path):
    args = ["analyze", "--instance", "chain", "--pairs", "30", "--seed", "3"]
    code_a, a = run_cli(tmp_path, *args, name="a")
    code_b, b = run_cli(tmp_path, *args, name="b")
    assert code_a == code_b == 0
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    runtime = json.loads((a / "runtime.json").read_text())
    assert runtime["backend"] in ("cython", "python")
    assert "total" in runtime["seconds"]


def test_seed_changes_samples(tmp_path):
    _, a = run_cli(tmp_path, "analyze", "--instance", "chain", "--pairs", "10", "--seed", "1",
                   name="a")
    _, b = run_cli(tmp_path, "analyze", "--instance", "chain", "--pairs", "10", "--seed", "2",
                   name="b")
    assert report(a)["provenance"]["seed"] == 1
    assert (a / "report.json").read_bytes() != (b / "report.json").read_bytes()


# ---------------------------------------------------------------- config


def test_config_precedence(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('instance = "chain"\npairs = 12\nseed = 4\n[params]\nK = 0.5\n')
    resolved = resolve_config("analyze", {"config": str(cfg), "seed": 9})
    assert resolved["instance"] == "chain"
    assert resolved["pairs"] == 12
    assert resolved["seed"] == 9
    assert resolved["K"] == 0.5
    assert resolved["suites"] == ["complex", "blowup"]
    assert resolved["radius"] == 3


def test_config_rejects_unknown_keys(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text("colour = 'blue'\n")
    with pytest.raises(UsageError):
        load_config(cfg)
    cfg.write_text("[params]\nzeta = 1\n")
    with pytest.raises(UsageError):
        load_config(cfg)


def test_config_file_drives_run(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('instance = "chain"\nsuites = "complex"\n')
    code, out = run_cli(tmp_path, "analyze", "--config", str(cfg))
    assert code == 0
    assert list(report(out)["suites"]) == ["complex"]


def test_suites_comma_separated():
    cfg = resolve_config("validate", {"suites": ["axioms,complex", "axioms"]})
    assert cfg["suites"] == ["axioms", "complex"]


# ---------------------------------------------------------------- outputs


def test_build_writes_exports(tmp_path):
    code, out = run_cli(tmp_path, "build", "--instance", "chain", "--raw")
    assert code == 0
    for name in ("complex.dot", "complex-raw.dot", "bounds.csv", "blowup-edges.csv"):
        assert (out / name).exists(), name
    assert (out / "complex.dot").read_text().count(" -- ") == 7
    rows = list(csv.DictReader((out / "bounds.csv").open()))
    assert len(rows) == 28
    assert report(out)["data"]["files"][0] == "complex.dot"


def test_raw_metric_analysis(tmp_path):
    code, out = run_cli(tmp_path, "analyze", "--instance", "chain", "--suite", "raw-question")
    assert code == 0
    checks = report(out)["suites"]["raw-question"]["checks"]
    assert checks[0]["status"] == "info"


def test_action_command(tmp_path):
    code, out = run_cli(tmp_path, "action", "--radius", "2", "--samples", "100")
    assert code == 0
    doc = report(out)
    tags = {c["tag"]: c["status"] for c in doc["suites"]["action"]["checks"]}
    assert tags["action.equivariance"] == "pass"
    assert tags["action.combinatorial-axis"] == "pass"
    assert tags["action.axis-reversal"] == "pass"
    assert (out / "translation.csv").exists()
    assert "a|1|2|1" in doc["data"]["wpd"]


def test_action_without_generators(tmp_path):
    inst = tmp_path / "t.json"
    inst.write_text(json.dumps({"xi": 1.0, "vertices": ["A", "B"], "dpi": {}}))
    code, out = run_cli(tmp_path, "action", "--instance", str(inst))
    assert code == 0
    assert report(out)["suites"]["action"]["checks"][0]["status"] == "info"


def test_auto_K_history_recorded(tmp_path):
    code, out = run_cli(tmp_path, "validate", "--instance", "chain", "--auto-K")
    assert code == 0
    assert "auto_K_history" in report(out)["provenance"]
