import json
import math
import os

import pandas as pd
import pytest
import yaml

from optics_percolation import cli, verify
from optics_percolation.errors import EXIT_OK, EXIT_PARAMETER, EXIT_REFUSED, EXIT_VERIFY_FAILED
from optics_percolation.percolation import RECORD_COLUMNS


@pytest.fixture
def run(config_dir, tmp_path):
    """Call ``cli.main`` with the shipped config and a temporary log file."""

    def _run(*argv, config=None):
        config = config or os.path.join(config_dir, "config.yml")
        log = str(tmp_path / "logs" / "process_log.txt")
        return cli.main([argv[0], "--config", config, "--log", log, *argv[1:]])

    return _run


def _read_json(path):
    with open(path) as f:
        return json.load(f)


class TestThreshold:
    def test_reference_subcritical(self, run, tmp_path):
        out = tmp_path / "threshold.json"
        code = run(
            "threshold", "--delta", "9", "--eta", "0.005", "--n", "1000",
            "--epsilon", "0.01", "--out", str(out),
        )
        assert code == EXIT_OK
        report = _read_json(out)
        assert report["simulable"] is True
        assert report["load"] == pytest.approx(0.405)
        assert report["y_star"] == pytest.approx(7.681, abs=1e-3)
        assert report["tail_bound"] == pytest.approx(0.01)
        assert report["hilbert_dim"]["exact"] == math.comb(79, 8)
        assert report["command"] == "threshold"

    def test_supercritical_reports_without_cap(self, run, tmp_path):
        out = tmp_path / "threshold.json"
        assert run("threshold", "--delta", "3", "--eta", "0.2", "--out", str(out)) == EXIT_OK
        report = _read_json(out)
        assert report["simulable"] is False
        assert report["margin"] == pytest.approx(-0.8)
        assert report["y_star"] is None

    def test_fock_inputs(self, run, tmp_path):
        out = tmp_path / "threshold.json"
        code = run(
            "threshold", "--delta", "3", "--eta", "0.05", "--fock-n", "2",
            "--n", "100", "--out", str(out),
        )
        assert code == EXIT_OK
        report = _read_json(out)
        assert report["condition"] == "fock_loss"
        assert report["load"] == pytest.approx(0.8775)
        assert report["y_star"] > 0

    def test_general_input(self, run, tmp_path):
        out = tmp_path / "threshold.json"
        assert run("threshold", "--delta", "3", "--general-p", "0.1", "--out", str(out)) == EXIT_OK
        report = _read_json(out)
        assert report["condition"] == "general_input"
        assert report["simulable"] is True

    def test_combined_noise_is_a_parameter_error(self, run, tmp_path):
        code = run("threshold", "--eta", "0.2", "--x", "0.5", "--out", str(tmp_path / "t.json"))
        assert code == EXIT_PARAMETER

    def test_stdout(self, run, capsys):
        assert run("threshold", "--delta", "9", "--eta", "0.005") == EXIT_OK
        assert json.loads(capsys.readouterr().out)["simulable"] is True


class TestPercolate:
    ARGS = ("--arch", "nonlocal", "--delta", "9", "--eta", "0.02,0.1", "--n", "50,100", "--trials", "2")

    def test_outputs(self, run, tmp_path):
        out = tmp_path / "perc.csv"
        assert run("percolate", *self.ARGS, "--seed", "3", "--out", str(out)) == EXIT_OK
        records = pd.read_csv(out)
        assert list(records.columns) == RECORD_COLUMNS
        assert len(records) == 2 * 2 * 2
        summary = pd.read_csv(tmp_path / "perc_summary.csv")
        assert len(summary) == 4
        meta = _read_json(tmp_path / "perc.meta.json")
        assert meta["seed"] == 3
        assert meta["generator"] == "nonlocal"
        assert meta["parameters"]["etas"] == [0.02, 0.1]

    def test_same_seed_same_bytes(self, run, tmp_path):
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        run("percolate", *self.ARGS, "--seed", "11", "--out", str(first))
        run("percolate", *self.ARGS, "--seed", "11", "--out", str(second))
        assert first.read_bytes() == second.read_bytes()

    def test_jsonl(self, run, tmp_path):
        out = tmp_path / "perc.jsonl"
        assert run("percolate", *self.ARGS, "--format", "jsonl", "--out", str(out)) == EXIT_OK
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 8
        assert set(json.loads(lines[0])) == set(RECORD_COLUMNS)

    def test_zero_trials(self, run, tmp_path):
        code = run("percolate", "--trials", "0", "--n", "50", "--out", str(tmp_path / "p.csv"))
        assert code == EXIT_PARAMETER

    def test_missing_section(self, run, tmp_path):
        config = tmp_path / "config.yml"
        config.write_text(yaml.safe_dump({"run": {"seed": 1}}))
        assert run("percolate", config=str(config)) == EXIT_PARAMETER


class TestSample:
    def test_default_circuit(self, run, tmp_path):
        out = tmp_path / "samples.jsonl"
        assert run("sample", "--num-samples", "50", "--seed", "4", "--out", str(out)) == EXIT_OK
        rows = [json.loads(line) for line in out.read_text().splitlines()]
        assert len(rows) == 50
        assert set(rows[0]) == {"outcome", "lost", "restarts", "component_sizes", "distinguishable"}
        for row in rows:
            assert len(row["outcome"]) == 6
            assert sum(row["outcome"]) + row["lost"] == 3
        meta = _read_json(tmp_path / "samples.meta.json")
        assert meta["summary"]["samples"] == 50
        assert meta["parameters"]["noise"]["kind"] == "loss"

    def test_csv_format(self, run, tmp_path):
        out = tmp_path / "samples.csv"
        assert run("sample", "--num-samples", "20", "--format", "csv", "--out", str(out)) == EXIT_OK
        frame = pd.read_csv(out)
        assert list(frame.columns) == [
            "outcome", "lost", "restarts", "component_sizes", "distinguishable"
        ]
        assert len(frame) == 20

    def test_supercritical_refused(self, run, tmp_path):
        out = tmp_path / "samples.jsonl"
        assert run("sample", "--eta", "0.5", "--num-samples", "5", "--out", str(out)) == EXIT_REFUSED
        assert not out.exists()

    def test_force(self, run, tmp_path):
        out = tmp_path / "samples.jsonl"
        code = run("sample", "--eta", "0.5", "--force", "--num-samples", "5", "--out", str(out))
        assert code == EXIT_OK
        assert len(out.read_text().splitlines()) == 5

    def test_combined_noise_rejected(self, run, tmp_path):
        code = run("sample", "--x", "0.5", "--num-samples", "5", "--out", str(tmp_path / "s.jsonl"))
        assert code == EXIT_PARAMETER

    def test_missing_circuit(self, run, tmp_path):
        code = run(
            "sample", "--circuit", str(tmp_path / "nope.json"), "--out", str(tmp_path / "s.jsonl")
        )
        assert code == EXIT_PARAMETER

    def test_malformed_circuit_json(self, run, tmp_path):
        circuit = tmp_path / "broken.json"
        circuit.write_text("{not json")
        code = run("sample", "--circuit", str(circuit), "--out", str(tmp_path / "s.jsonl"))
        assert code == EXIT_PARAMETER
        assert str(circuit) in (tmp_path / "logs" / "process_log.txt").read_text()

    @pytest.mark.parametrize(
        "payload",
        ['{"occupations": {"0": 1.5}}', '{"occupations": {"zero": 1}}', '{"modes": ["a"]}', "[0, 2]"],
        ids=["fractional", "bad-mode", "bad-modes-list", "not-an-object"],
    )
    def test_malformed_input_file(self, run, tmp_path, payload):
        inputs = tmp_path / "inputs.json"
        inputs.write_text(payload)
        code = run("sample", "--input", str(inputs), "--out", str(tmp_path / "s.jsonl"))
        assert code == EXIT_PARAMETER

    def test_malformed_config(self, run, tmp_path):
        config = tmp_path / "config.yml"
        config.write_text("run: [unclosed\n")
        assert run("sample", config=str(config)) == EXIT_PARAMETER

    def test_non_numeric_noise(self, run, tmp_path, config_dir):
        with open(os.path.join(config_dir, "config.yml")) as f:
            data = yaml.safe_load(f)
        data["noise"]["eta"] = "high"
        data["sampling"]["circuit"] = os.path.join(config_dir, data["sampling"]["circuit"])
        data["sampling"]["input"] = os.path.join(config_dir, data["sampling"]["input"])
        config = tmp_path / "config.yml"
        config.write_text(yaml.safe_dump(data))
        code = run("sample", "--out", str(tmp_path / "s.jsonl"), config=str(config))
        assert code == EXIT_PARAMETER


class TestMpsCheck:
    def test_report(self, run, tmp_path):
        out = tmp_path / "mps.json"
        assert run("mps-check", "--out", str(out)) == EXIT_OK
        report = _read_json(out)
        assert report["photons"] == 3
        assert report["delta"] == 4
        assert report["max_bond"] <= 8
        assert report["fidelity"] == pytest.approx(1.0, abs=1e-8)
        assert len(report["schmidt_ranks"]) == 5
        assert max(report["schmidt_ranks"]) <= 8

    def test_bond_cap(self, run, tmp_path):
        assert run("mps-check", "--max-bond", "1", "--out", str(tmp_path / "m.json")) != EXIT_OK


class TestVerify:
    @pytest.fixture
    def light_checks(self, monkeypatch):
        monkeypatch.setattr(verify, "CHECKS", [verify.check_hom_dip, verify.check_fock_threshold])

    def test_passes(self, run, tmp_path, light_checks):
        out = tmp_path / "verify.json"
        assert run("verify", "--out", str(out)) == EXIT_OK
        report = _read_json(out)
        assert report["passed"] is True
        assert [c["name"] for c in report["checks"]] == ["hom_dip", "fock_threshold"]

    def test_injected_fault_fails(self, run, tmp_path, light_checks):
        out = tmp_path / "verify.json"
        code = run("verify", "--inject-fault", "permanent-sign", "--out", str(out))
        assert code == EXIT_VERIFY_FAILED
        report = _read_json(out)
        assert report["passed"] is False
        assert report["inject_fault"] == "permanent-sign"
