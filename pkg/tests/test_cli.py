import csv
import json
from pathlib import Path

import numpy as np
import pytest

from nvmix.cli import (EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, ParseError, ResultEnvelope, RunConfig,
                       UsageError, ingest_observations, main, parse_config)

DATA = Path(__file__).resolve().parents[1] / "data" / "synthetic_stones.txt"


def run_cli(tmp_path, *args):
    out = tmp_path / "result.json"
    code = main([*args, "--output", str(out)])
    env = json.loads(out.read_text()) if out.exists() else None
    return code, env


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestIngest:
    def test_log_transform(self, tmp_path):
        p = tmp_path / "x.txt"
        p.write_text("1.0\n2.0\n")
        s = ingest_observations(p, log=True)
        np.testing.assert_allclose(s.values, [0.0, 0.6931471805599453])

    def test_header_and_blank_lines(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("carats\n0.3\n\n0.5\n")
        assert ingest_observations(p).values.tolist() == [0.3, 0.5]

    def test_stand_in_data(self):
        s = ingest_observations(DATA, log=True)
        assert s.n == 1022 and np.all(np.isfinite(s.values))

    @pytest.mark.parametrize("text,where", [("1.0\nabc\n", ":2:"), ("1\n2\n3,4\n", ":3:"),
                                            ("header\n", "no observations")])
    def test_errors_name_the_line(self, tmp_path, text, where):
        p = tmp_path / "bad.txt"
        p.write_text(text)
        with pytest.raises(ParseError, match=where):
            ingest_observations(p)

    def test_log_needs_positive(self, tmp_path):
        p = tmp_path / "neg.txt"
        p.write_text("1.0\n-2.0\n")
        with pytest.raises(ParseError):
            ingest_observations(p, log=True)


class TestConfig:
    def test_unknown_keys_rejected(self):
        with pytest.raises(UsageError, match="unknown config keys"):
            RunConfig.from_dict({"command": "simulate", "colour": "blue"})

    def test_config_file_merged_with_flags(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"n": 50, "seed": 4, "model": "gamma"}))
        cfg = parse_config(["simulate", "--config", str(p), "--seed", "9"])
        assert (cfg.n, cfg.seed, cfg.model) == (50, 9, "gamma")

    def test_config_file_with_unknown_key(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"nn": 50}))
        assert main(["simulate", "--config", str(p)]) == EXIT_USAGE

    def test_grid_defaults(self):
        fit = RunConfig(command="fit").grid_points()
        assert fit[0] == 0.1 and fit[-1] == 8.0 and len(fit) == 80
        assert len(RunConfig(command="study").grid_points()) == 50

    def test_envelope_round_trip(self):
        env = ResultEnvelope("fit", {"a": 1}, {"mu_hat": 0.1}, {"bracket_found": True})
        assert ResultEnvelope.from_json(env.to_json()) == env


class TestCommands:
    def test_simulate_deterministic(self, tmp_path):
        snapshots = []
        for _ in range(2):
            assert main(["simulate", "--n", "200", "--seed", "7", "--output", str(tmp_path / "run.json")]) == EXIT_OK
            snapshots.append(((tmp_path / "run.json").read_bytes(), (tmp_path / "run_sample.csv").read_bytes()))
        assert snapshots[0] == snapshots[1]
        assert b"\r\n" in snapshots[0][1]
        assert len(read_csv(tmp_path / "run_sample.csv")) == 201

    def test_simulate_stdout(self, capsys):
        assert main(["simulate", "--n", "5", "--model", "gamma"]) == EXIT_OK
        env = json.loads(capsys.readouterr().out)
        assert env["command"] == "simulate" and len(env["outputs"]["values"]) == 5
        assert env["timing"] is None

    def test_timing_flag(self, tmp_path):
        _, env = run_cli(tmp_path, "simulate", "--n", "5", "--timing")
        assert env["timing"]["seconds"] >= 0

    def test_estimate_mu(self, tmp_path):
        code, env = run_cli(tmp_path, "estimate-mu", "--input", str(DATA), "--log")
        assert code == EXIT_OK
        assert env["outputs"]["bracket_found"] and 0 < env["outputs"]["mu_hat"] < 0.3

    def test_estimate_density_needs_mu(self, tmp_path):
        code, _ = run_cli(tmp_path, "estimate-density", "--n", "100")
        assert code == EXIT_USAGE

    def test_estimate_density(self, tmp_path):
        code, env = run_cli(tmp_path, "estimate-density", "--n", "2000", "--mu", "0.5", "--seed", "1")
        assert code == EXIT_OK
        assert env["outputs"]["estimator"] == "known_mu"
        assert 0 < env["outputs"]["r_metric"] < 0.3
        rows = read_csv(tmp_path / "result_density.csv")
        assert rows[0] == ["s", "g_hat", "g_hat_clipped", "g_true"] and len(rows) == 51

    def test_fit(self, tmp_path):
        code, env = run_cli(tmp_path, "fit", "--input", str(DATA), "--log")
        assert code == EXIT_OK
        out = env["outputs"]
        assert out["n"] == 1022
        s = out["g_hat"]["s"]
        assert s[0] == 0.1 and s[-1] == 8.0
        assert len(out["p_hat"]["x"]) == 201
        assert np.trapezoid(out["p_hat"]["normalized"], out["p_hat"]["x"]) == pytest.approx(1, abs=0.05)
        g = read_csv(tmp_path / "result_g_hat.csv")
        assert g[0] == ["s", "g_hat", "g_hat_clipped"]
        assert len(read_csv(tmp_path / "result_p_hat.csv")) == 202

    def test_study_table(self, tmp_path):
        code, env = run_cli(tmp_path, "study", "--replicates", "100", "--seed", "3")
        assert code == EXIT_OK
        rows = read_csv(tmp_path / "result_study.csv")
        assert rows[0] == ["n", "replicate", "status", "mu_hat", "bracket_found", "r_known", "r_plugin"]
        assert len(rows) == 1 + 4 * 100
        assert set(env["outputs"]["summary"]) == {"100", "300", "500", "1000"}
        assert env["outputs"]["mu_rmse_slope"] < 0

    def test_oracle_check(self, tmp_path, capsys):
        code, env = run_cli(tmp_path, "oracle-check", "--v-max", "5")
        assert code == EXIT_OK
        assert "max grid error" in capsys.readouterr().out
        assert env["outputs"]["max_grid_error"] < 1e-2

    @pytest.mark.parametrize("argv", [[], ["bogus"], ["simulate", "--n", "x"], ["simulate", "--n", "0"],
                                      ["study", "--sizes", "300", "100"], ["fit", "--model", "nope"],
                                      ["fit", "--tuning", "theory"]])
    def test_usage_errors(self, argv, capsys):
        assert main(argv) == EXIT_USAGE
        assert json.loads(capsys.readouterr().err)["error"]["type"] == "usage"

    def test_runtime_error(self, tmp_path, capsys):
        assert main(["estimate-mu", "--input", str(tmp_path / "missing.txt")]) == EXIT_RUNTIME
        assert "error" in json.loads(capsys.readouterr().err)
