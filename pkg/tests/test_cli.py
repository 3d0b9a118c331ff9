import json
import subprocess
import sys

import numpy as np
import pytest

from smoothwass import cli
from smoothwass.config import build_config, load_config, parse_model
from smoothwass.errors import ConfigError
from smoothwass.measures import DiagGaussian, DiscreteMeasure, Gaussian, GaussianMixture, Uniform
from smoothwass.outputs import OUTPUT_ENV, config_hash, read_csv


def run_cli(args, capsys):
    code = cli.main(args)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def summary(out):
    return json.loads(out)


class TestCommands:
    def test_swd_shift(self, tmp_path, capsys):
        code, out, _ = run_cli(["swd", "--p", "gaussian:0,1", "--q", "gaussian:1,1", "--out", str(tmp_path)], capsys)
        assert code == 0
        assert summary(out)["result"]["value"] == pytest.approx(1.0, abs=1e-6)
        manifest, header, rows = read_csv(tmp_path / "swd.csv")
        assert header[0] == "value" and float(rows[0][0]) == pytest.approx(1.0, abs=1e-6)
        assert manifest["command"] == "swd" and manifest["config_hash"] == config_hash(manifest["config"])
        assert "threads" not in manifest["config"] and "out" not in manifest["config"]

    def test_ot_files(self, tmp_path, capsys):
        a = tmp_path / "a.txt"
        b = tmp_path / "b.txt"
        a.write_text("0\n1\n")
        b.write_text("2\n3\n")
        code, out, _ = run_cli(["ot", "--p", f"file:{a}", "--q", f"file:{b}", "--out", str(tmp_path)], capsys)
        assert code == 0
        assert summary(out)["result"]["cost"] == pytest.approx(2.0)
        _, _, rows = read_csv(tmp_path / "ot_plan.csv")
        assert sum(float(r[2]) for r in rows) == pytest.approx(1.0)

    def test_ot_sinkhorn(self, tmp_path, capsys):
        code, out, _ = run_cli(["ot", "--p", "gaussian:0,1", "--q", "gaussian:1,1", "--n", "20",
                                "--ot-method", "sinkhorn", "--epsilon", "0.05", "--out", str(tmp_path)], capsys)
        assert code == 0 and "lower_band" in summary(out)["result"]

    def test_mswe(self, tmp_path, capsys):
        code, out, _ = run_cli(["mswe", "--data", "gaussian:0.5,1", "--n", "500", "--family", "gaussian:0,1",
                                "--lower=-2,0.1", "--upper", "2,3", "--out", str(tmp_path)], capsys)
        assert code == 0
        theta = summary(out)["result"]["theta_hat"]
        assert np.linalg.norm(np.array(theta) - [0.5, 1.0]) < 0.3
        _, header, rows = read_csv(tmp_path / "mswe_trace.csv")
        assert header == ["evaluation", "theta0", "theta1", "objective"] and rows

    def test_bootstrap_with_svg(self, tmp_path, capsys):
        code, out, _ = run_cli(["bootstrap", "--data", "gaussian:0,1", "--n", "100", "--B", "40", "--svg",
                                "--out", str(tmp_path)], capsys)
        assert code == 0
        res = summary(out)["result"]
        assert res["q_hat"] > 0 and "bootstrap_kde.svg" in res["files"]
        assert (tmp_path / "bootstrap_kde.svg").read_text().startswith("<svg")

    def test_twosample(self, tmp_path, capsys):
        code, out, _ = run_cli(["twosample", "--p", "gaussian:0,1", "--q", "gaussian:3,1", "--n", "60",
                                "--m-samples", "50", "--B", "50", "--out", str(tmp_path)], capsys)
        assert code == 0
        res = summary(out)["result"]
        assert res["reject"] and res["n"] == 60 and res["m"] == 50

    def test_rates_with_svg(self, tmp_path, capsys):
        code, out, _ = run_cli(["rates", "--ns", "16,64,256", "--trials", "20", "--sigmas", "1,0.5", "--svg",
                                "--out", str(tmp_path)], capsys)
        assert code == 0
        fits = summary(out)["result"]["fits"]
        assert [f["sigma"] for f in fits] == [1.0, 0.5]
        _, header, rows = read_csv(tmp_path / "rates_trials.csv")
        assert header == ["sigma", "n", "trial", "swd"] and len(rows) == 2 * 3 * 20
        assert (tmp_path / "rates.svg").exists()

    def test_scatter(self, tmp_path, capsys):
        code, _, _ = run_cli(["scatter", "--ns", "64,128", "--trials", "2", "--restarts", "0", "--svg",
                              "--out", str(tmp_path)], capsys)
        assert code == 0
        assert any(p.suffix == ".csv" for p in tmp_path.iterdir())
        assert any(p.suffix == ".svg" for p in tmp_path.iterdir())

    def test_concentration_compact(self, tmp_path, capsys):
        code, out, err = run_cli(["concentration", "--n", "50", "--trials", "100", "--out", str(tmp_path)], capsys)
        assert code == 0 and err == ""
        assert summary(out)["result"]

    def test_concentration_caveat(self, tmp_path, capsys):
        code, _, err = run_cli(["concentration", "--n", "50", "--trials", "100", "--kind", "poly", "--q", "2",
                                "--max-moment", "3", "--second-moment", "1", "--eta", "0.1", "--C", "1",
                                "--out", str(tmp_path)], capsys)
        assert code == 0 and err.strip()

    def test_selftest(self, tmp_path, capsys):
        code, out, _ = run_cli(["selftest", "--out", str(tmp_path)], capsys)
        assert code == 0 and summary(out)["result"]["ok"]

    def test_selftest_failure_exit(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setattr(cli, "selftest_checks", lambda seed: {"broken": {"ok": False, "max_error": 1.0}})
        code, _, _ = run_cli(["selftest", "--out", str(tmp_path)], capsys)
        assert code == 1

    def test_module_entry_point(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "smoothwass", "selftest", "--out", str(tmp_path)],
                              capture_output=True, text=True, timeout=120)
        assert proc.returncode == 0, proc.stderr


class TestExitCodes:
    def test_unknown_flag(self, capsys):
        assert run_cli(["swd", "--bogus", "1"], capsys)[0] == 2

    def test_unknown_command(self, capsys):
        assert run_cli(["frobnicate"], capsys)[0] == 2

    def test_zero_sigma_names_key(self, tmp_path, capsys):
        code, _, err = run_cli(["swd", "--p", "gaussian:0,1", "--q", "gaussian:1,1", "--sigma", "0",
                                "--out", str(tmp_path)], capsys)
        assert code == 2 and "sigma" in err

    def test_missing_source(self, tmp_path, capsys):
        code, _, err = run_cli(["swd", "--p", "gaussian:0,1", "--out", str(tmp_path)], capsys)
        assert code == 2 and "q" in err

    def test_bad_model(self, tmp_path, capsys):
        code, _, err = run_cli(["swd", "--p", "cauchy:0,1", "--q", "gaussian:0,1", "--out", str(tmp_path)], capsys)
        assert code == 2 and "p:" in err

    def test_internal_failure(self, tmp_path, capsys, monkeypatch):
        def boom(cfg, root, out):
            raise RuntimeError("solver exploded")

        monkeypatch.setitem(cli.HANDLERS, "swd", boom)
        code, _, err = run_cli(["swd", "--p", "gaussian:0,1", "--q", "gaussian:0,1", "--out", str(tmp_path)], capsys)
        assert code == 1 and "solver exploded" in err and "Traceback" not in err


class TestConfigFiles:
    def test_minimal_rates_file(self, tmp_path, capsys):
        cfg = tmp_path / "rates.json"
        cfg.write_text(json.dumps({"ns": [16, 256], "trials": 20}))
        code, out, _ = run_cli(["rates", "--config", str(cfg), "--out", str(tmp_path / "o")], capsys)
        assert code == 0
        assert summary(out)["manifest"]["config"]["ns"] == [16, 256]

    def test_flags_override_file(self, tmp_path, capsys):
        cfg = tmp_path / "rates.json"
        cfg.write_text(json.dumps({"ns": [16, 256], "trials": 20, "seed": 3}))
        code, out, _ = run_cli(["rates", "--config", str(cfg), "--seed", "4", "--out", str(tmp_path)], capsys)
        assert code == 0 and summary(out)["manifest"]["seed"] == 4

    def test_zero_sigma_in_file(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"p": "gaussian:0,1", "q": "gaussian:1,1", "sigma": 0}))
        code, _, err = run_cli(["swd", "--config", str(cfg), "--out", str(tmp_path)], capsys)
        assert code == 2 and "sigma" in err

    def test_duplicate_key(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text('{"sigma": 1, "sigma": 2}')
        with pytest.raises(ConfigError) as info:
            load_config(cfg)
        assert info.value.key == "sigma"

    def test_unknown_key(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"sigmaa": 1.0}))
        code, _, err = run_cli(["swd", "--config", str(cfg), "--out", str(tmp_path)], capsys)
        assert code == 2 and "sigmaa" in err

    def test_invalid_json(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text("{not json")
        assert run_cli(["swd", "--config", str(cfg)], capsys)[0] == 2

    def test_missing_file(self, tmp_path, capsys):
        assert run_cli(["swd", "--config", str(tmp_path / "nope.json")], capsys)[0] == 2

    def test_wrong_command_in_summary(self, tmp_path, capsys):
        assert run_cli(["selftest", "--out", str(tmp_path)], capsys)[0] == 0
        code, _, err = run_cli(["rates", "--config", str(tmp_path / "selftest_summary.json")], capsys)
        assert code == 2 and "command" in err

    def test_manifest_rerun_is_byte_identical(self, tmp_path, capsys):
        args = ["bootstrap", "--data", "gaussian:0,1", "--n", "80", "--B", "20", "--seed", "5"]
        assert run_cli(args + ["--out", str(tmp_path / "a")], capsys)[0] == 0
        rerun = ["bootstrap", "--config", str(tmp_path / "a" / "bootstrap_summary.json"), "--out", str(tmp_path / "b")]
        assert run_cli(rerun, capsys)[0] == 0
        first = (tmp_path / "a" / "bootstrap_stats.csv").read_bytes()
        assert first == (tmp_path / "b" / "bootstrap_stats.csv").read_bytes()

    def test_build_config_validates_types(self):
        with pytest.raises(ConfigError) as info:
            build_config("rates", {"trials": "many"}, {})
        assert info.value.key == "trials"
        with pytest.raises(ConfigError):
            build_config("rates", {"trials": 5}, {})


class TestOutputDirectory:
    def test_env_var(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
        assert run_cli(["selftest"], capsys)[0] == 0
        assert (tmp_path / "env" / "selftest.csv").exists()

    def test_flag_beats_env(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
        assert run_cli(["selftest", "--out", str(tmp_path / "flag")], capsys)[0] == 0
        assert (tmp_path / "flag" / "selftest.csv").exists()
        assert not (tmp_path / "env").exists()


class TestModelGrammar:
    def test_families(self, tmp_path):
        g = parse_model("gaussian:1,2,0.5")
        assert isinstance(g, Gaussian) and g.dim == 2 and g.scale == 0.5
        assert isinstance(parse_model("diag:0,0,1,2"), DiagGaussian)
        u = parse_model("uniform:0,1")
        assert isinstance(u, Uniform) and u.dim == 1
        mix = parse_model("mixture:[0.3,0,1;0.7,2,0.5]")
        assert isinstance(mix, GaussianMixture) and mix.dim == 1
        pts = tmp_path / "pts.csv"
        pts.write_text("# header\n0,1\n2,3\n")
        data = parse_model(f"file:{pts}", d=2)
        assert isinstance(data, DiscreteMeasure) and data.n == 2

    def test_dimension_hint(self):
        assert parse_model("gaussian:0,0,1", d=2).dim == 2
        with pytest.raises(ConfigError):
            parse_model("gaussian:0,1", d=2)

    @pytest.mark.parametrize("spec", ["gaussian", "gaussian:", "gaussian:0,-1", "mixture:0.5,0,1",
                                      "mixture:[0.5,0,1;0.6,1,1]", "uniform:1,0", "weird:1", "gaussian:a,b",
                                      "file:/no/such/file"])
    def test_errors_name_key(self, spec):
        with pytest.raises(ConfigError) as info:
            parse_model(spec, key="p")
        assert info.value.key == "p"
