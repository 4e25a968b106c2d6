import csv
import io
import json
import subprocess
import sys

import pytest

from vnflow import cli
from vnflow.cli import deterministic_view, main, run_certify
from vnflow.config import load_config
from vnflow.errors import PrecisionExhausted


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def write(tmp_path, text, name="c.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_certify_small_run(configs_dir, capsys):
    code, out, _ = run(["certify", "--config", str(configs_dir / "golden_demo.yaml"), "--pairs", "3"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["pairs"] == 3 and rep["summary"]["pass"] == 3
    assert rep["precision"] == 256 and "delta0" in rep
    assert set(rep["timing"]) == {"wall_clock_s", "timestamp"}


def test_certify_csv_and_out(configs_dir, tmp_path, capsys):
    out = tmp_path / "c.csv"
    code, _, _ = run(["certify", "--config", str(configs_dir / "golden_demo.yaml"), "--pairs", "2",
                      "--format", "csv", "--out", str(out)], capsys)
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 2 and all(r["verdict"] == "pass" for r in rows)


def test_zero_pairs(configs_dir, capsys):
    code, out, _ = run(["certify", "--config", str(configs_dir / "golden_demo.yaml"), "--pairs", "0"], capsys)
    assert code == 0 and json.loads(out)["records"] == []


def test_slope_two_is_a_contract_violation(tmp_path, capsys):
    cfg = write(tmp_path, "roof: {A: 2.0, c: 0.5}\n")
    code, _, err = run(["certify", "--config", cfg, "--pairs", "1"], capsys)
    assert code == 4 and "RescaleRequired" in err


@pytest.mark.parametrize("argv", [
    ["c1decay", "--grid", "1"],
    ["certify", "--precision", "100", "--pairs", "1"],
    ["certify", "--beta", "1.5", "--pairs", "1"],
    ["profile", "--partition", "ten"],
])
def test_contract_violations(argv, capsys):
    assert run(argv, capsys)[0] == 4


def test_missing_config_file(tmp_path, capsys):
    code, _, err = run(["certify", "--config", str(tmp_path / "nope.yaml")], capsys)
    assert code == 4 and "cannot read" in err


def test_env_precision(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("VNFLOW_PRECISION", "128")
    cfg = write(tmp_path, "roof: {c: 0.7}\n")
    code, out, _ = run(["trichotomy", "--config", cfg, "--pairs", "2", "--depth", "4"], capsys)
    assert code == 0 and json.loads(out)["precision"] == 128
    code, out, _ = run(["trichotomy", "--config", cfg, "--pairs", "2", "--depth", "4",
                        "--precision", "192"], capsys)
    assert json.loads(out)["precision"] == 192


def test_trichotomy_hit_at_zero_every_scale(tmp_path, capsys):
    cfg = write(tmp_path, "trichotomy: {depth: 6, explicit: [[0.9999, 0.0001]]}\n")
    code, out, _ = run(["trichotomy", "--config", cfg], capsys)
    assert code == 0
    scales = json.loads(out)["records"][0]["scales"]
    assert len(scales) == 7
    assert all(s["case"] == "a" and s["hit_k"] == 0 for s in scales)
    code, out, _ = run(["trichotomy", "--config", cfg, "--format", "csv"], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["case"] for r in rows] == ["a"] * 7


def test_profile_identical_pair(tmp_path, capsys):
    cfg = write(tmp_path, "roof: {c: 0.7}\nprofile: {p: [0.3, 0.1], q: [0.3, 0.1], horizon: 20.0}\n")
    code, out, _ = run(["profile", "--config", cfg, "--format", "json"], capsys)
    assert code == 0
    s = json.loads(out)["summary"]
    assert s["lambda_far"] == 0.0 and s["partition_sum_exact"]


def test_profile_csv(configs_dir, capsys):
    code, out, err = run(["profile", "--config", str(configs_dir / "golden_linear.yaml"), "--format", "csv"], capsys)
    assert code == 0
    assert out.splitlines()[0] == "t_start,t_end,distance,is_far"
    summary = json.loads(err.strip().splitlines()[-1])
    assert summary["hamming"]["m"] == 20


def test_c1decay_zero_g(tmp_path, capsys):
    cfg = write(tmp_path, "roof: {c: 0.7}\nc1decay: {q_range: [2, 5], grid: 64}\n")
    code, out, _ = run(["c1decay", "--config", cfg, "--format", "json"], capsys)
    assert code == 0
    assert all(r["estimate"] == 0.0 for r in json.loads(out)["rows"])


def test_c1decay_csv(configs_dir, capsys):
    code, out, _ = run(["c1decay", "--config", str(configs_dir / "golden_demo.yaml"), "--n", "1,5,21"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [int(r["n"]) for r in rows] == [1, 5, 21]


def test_undecidable_maps_to_three(configs_dir, capsys, monkeypatch):
    def boom(*a, **k):
        raise PrecisionExhausted("too close to call")
    monkeypatch.setattr(cli, "run_c1decay", boom)
    code, _, err = run(["c1decay", "--config", str(configs_dir / "golden_demo.yaml")], capsys)
    assert code == 3 and "undecidable" in err


def test_certify_is_deterministic(configs_dir):
    spec = load_config(configs_dir / "golden_demo.yaml")
    a, _ = run_certify(spec, pairs=4, seed=11)
    b, _ = run_certify(spec, pairs=4, seed=11)
    c, _ = run_certify(spec, pairs=4, seed=11, workers=2)
    assert deterministic_view(a) == deterministic_view(b) == deterministic_view(c)


def test_module_entry_point(configs_dir):
    res = subprocess.run([sys.executable, "-m", "vnflow", "c1decay", "--config",
                          str(configs_dir / "golden_demo.yaml"), "--n", "3"],
                         capture_output=True, text=True, timeout=120)
    assert res.returncode == 0 and res.stdout.startswith("label,n,estimate")
