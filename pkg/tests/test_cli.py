"""Command-line interface: exit codes, CSV output, determinism."""

import json
import subprocess
import sys

import pytest

PYTHON = sys.executable


def run_cli(*args, cwd="/root/pkg"):
    return subprocess.run(
        [PYTHON, "-m", "meshattest.cli", *args],
        capture_output=True, text=True, cwd=cwd)


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps({
        "name": "tiny",
        "n": 7,
        "topology": {"kind": "tree", "arity": 2},
        "delta": 10.0,
        "periods": 2,
        "crypto": "real",
    }))
    return str(path)


class TestValidate:
    def test_valid_config(self, tiny_config):
        proc = run_cli("validate", tiny_config)
        assert proc.returncode == 0
        assert proc.stdout.strip() == "ok"

    def test_delta_violation_exit_2_with_hint(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({
            "n": 4, "topology": {"kind": "tree", "arity": 2},
            "delta": 400.0, "t_attack": 600.0, "periods": 2}))
        proc = run_cli("validate", str(path))
        assert proc.returncode == 2
        assert "t_attack/2" in proc.stderr

    def test_missing_field_exit_2(self, tmp_path):
        path = tmp_path / "missing.json"
        path.write_text(json.dumps({"topology": {"kind": "tree", "arity": 2}}))
        proc = run_cli("validate", str(path))
        assert proc.returncode == 2

    def test_unreadable_file_exit_2(self):
        proc = run_cli("validate", "/nonexistent/config.json")
        assert proc.returncode == 2


class TestRun:
    def test_csv_on_stdout(self, tiny_config):
        proc = run_cli("run", tiny_config, "--seed", "3")
        assert proc.returncode == 0
        lines = proc.stdout.strip().splitlines()
        assert lines[0] == "scenario,seed,metric,time,value"
        assert any("hb_completion" in line for line in lines)

    def test_verdict_exported_as_csv_row(self):
        proc = run_cli("run", "configs/capture_attack_demo.json", "--seed", "1")
        assert proc.returncode == 0
        verdicts = [line for line in proc.stdout.splitlines()
                    if "verdict[ts=" in line]
        assert verdicts
        bits = verdicts[0].rsplit(",", 1)[1]
        assert set(bits) <= {"0", "1"} and len(bits) == 12

    def test_output_file_and_trace(self, tiny_config, tmp_path):
        out = tmp_path / "metrics.csv"
        trace = tmp_path / "trace.log"
        proc = run_cli("run", tiny_config, "--out", str(out),
                       "--trace", str(trace))
        assert proc.returncode == 0
        assert out.read_text().startswith("scenario,seed")
        assert "SEND msg_new" in trace.read_text()

    def test_multiple_seeds_deterministic(self, tiny_config):
        p1 = run_cli("run", tiny_config, "--seeds", "3")
        p2 = run_cli("run", tiny_config, "--seeds", "3")
        assert p1.returncode == p2.returncode == 0
        assert p1.stdout == p2.stdout
        seeds = {line.split(",")[1] for line in p1.stdout.splitlines()[1:]}
        assert seeds == {"0", "1", "2"}

    def test_null_crypto_flag(self, tiny_config):
        proc = run_cli("run", tiny_config, "--null-crypto")
        assert proc.returncode == 0

    def test_bad_config_exit_2(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{]")
        proc = run_cli("run", str(path))
        assert proc.returncode == 2


class TestSecatt:
    def test_sound_strategy_exit_0(self):
        proc = run_cli("secatt", "--strategy", "rejoin", "--n", "6",
                       "--c", "2", "--seed", "4")
        assert proc.returncode == 0
        assert "sound" in proc.stdout

    def test_negative_control_reports_success(self):
        proc = run_cli("secatt", "--strategy", "negative-control",
                       "--n", "8", "--seed", "1")
        assert proc.returncode == 0
        assert "attack-succeeded" in proc.stdout

    def test_unknown_strategy_rejected(self):
        proc = run_cli("secatt", "--strategy", "warp")
        assert proc.returncode == 2
