import json
import shutil
from pathlib import Path

import pytest

from tsmin.cli import main
from tsmin.instance import load_instance

DATA = Path(__file__).parent / "data"


@pytest.fixture
def toy_file(tmp_path):
    dst = tmp_path / "toy.json"
    shutil.copy(DATA / "toy.json", dst)
    return dst


def test_generate_round_trip(tmp_path):
    out = tmp_path / "gen.json"
    args = ["generate", "--tests", "12", "--stmts", "30", "--faults", "4", "--density", "0.3", "--seed", "5", "-o"]
    assert main(args + [str(out)]) == 0
    first = out.read_bytes()
    assert main(args + [str(out)]) == 0
    assert out.read_bytes() == first
    inst = load_instance(out)
    assert (inst.num_tests, inst.num_stmts, inst.num_faults) == (12, 30, 4)


@pytest.mark.parametrize("argv", [
    ["generate", "--tests", "5", "--stmts", "5", "--faults", "2", "--seed", "0", "-o", "x.json"],
    ["generate", "--tests", "5", "--stmts", "5", "--faults", "2", "--density", "0", "--seed", "0", "-o", "x.json"],
    ["reduce"],
    ["frobnicate"],
])
def test_usage_errors(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 2


def test_rl_rejects_bicriteria(toy_file, tmp_path):
    assert main(["reduce", str(toy_file), "-o", str(tmp_path / "s.json"), "--objective", "bicriteria"]) == 2


def test_reduce_oracle_toy(toy_file, tmp_path):
    out = tmp_path / "sol.json"
    assert main(["reduce", str(toy_file), "--solver", "oracle", "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["selected_ids"] == ["t1", "t2"] and doc["feasible"] and doc["proven_optimal"]
    report = json.loads(out.with_suffix(".report.json").read_text())
    assert report["metrics"]["fault_detection_rate_pct"] == 100.0 and report["ablation"] is False


def test_constant_similarity_is_marked_as_ablation(toy_file, tmp_path):
    out = tmp_path / "sol.json"
    assert main(["reduce", str(toy_file), "--solver", "oracle", "--similarity", "constant:0.5", "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["objective"] == 2.5 and doc["similarity_mode"] == "constant:0.5"
    assert json.loads(out.with_suffix(".report.json").read_text())["ablation"] is True


def test_reduce_rl_toy(toy_file, tmp_path):
    out = tmp_path / "rl.json"
    log = tmp_path / "train.jsonl"
    argv = ["reduce", str(toy_file), "-o", str(out), "--steps", "500", "--n-steps", "50", "--log", str(log),
            "--checkpoint", str(tmp_path / "ckpt.npz")]
    assert main(argv) == 0
    assert json.loads(out.read_text())["selected_ids"] == ["t1", "t2"]
    assert len(log.read_text().splitlines()) >= 1
    assert (tmp_path / "ckpt.npz").exists()


def test_oracle_limit_exit_code(tmp_path):
    inst = tmp_path / "big.json"
    main(["generate", "--tests", "25", "--stmts", "30", "--faults", "5", "--density", "0.3", "--seed", "1", "-o", str(inst)])
    assert main(["oracle", str(inst)]) == 4
    assert main(["oracle", str(inst), "--force-bnb", "-o", str(tmp_path / "o.json")]) == 0


def test_evaluate(toy_file, tmp_path, capsys):
    sol = tmp_path / "sol.json"
    sol.write_text(json.dumps({"selected_ids": ["t2", "t3"]}))
    csv_path = tmp_path / "m.csv"
    assert main(["evaluate", str(toy_file), str(sol), "--csv", str(csv_path)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["metrics"]["fault_detection_rate_pct"] == 75.0
    assert not doc["feasible"] and doc["uncovered"] == ["f4"]
    assert csv_path.exists()
    sol.write_text(json.dumps({"selected_ids": ["t9"]}))
    assert main(["evaluate", str(toy_file), str(sol)]) == 3


def test_invalid_instances_exit_3(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["validate", str(bad)]) == 3
    assert main(["reduce", str(bad), "-o", str(tmp_path / "s.json")]) == 3
    assert main(["reduce", str(tmp_path / "missing.json"), "-o", str(tmp_path / "s.json")]) == 3
    doc = json.loads((DATA / "toy.json").read_text())
    doc["fault_edges"] = [e for e in doc["fault_edges"] if e[1] != 3]
    infeasible = tmp_path / "inf.json"
    infeasible.write_text(json.dumps(doc))
    assert main(["reduce", str(infeasible), "--solver", "greedy", "-o", str(tmp_path / "s.json")]) == 3


def test_validate_ok(toy_file, capsys):
    assert main(["validate", str(toy_file)]) == 0
    assert json.loads(capsys.readouterr().out)["ok"] is True


def test_output_dir_env(toy_file, tmp_path, monkeypatch):
    monkeypatch.setenv("TSMIN_OUTPUT_DIR", str(tmp_path / "outdir"))
    assert main(["reduce", str(toy_file), "--solver", "greedy", "-o", "g.json"]) == 0
    assert (tmp_path / "outdir" / "g.json").exists()
