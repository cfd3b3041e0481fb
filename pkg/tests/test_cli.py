import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from greedycond import cli
from greedycond.exceptions import ConfigError

CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, "configs")


def load(name):
    with open(os.path.join(CONFIGS, name)) as fh:
        return json.load(fh)


def small_bm(**sections):
    cfg = {
        "model": {"name": "brownian_restriction", "params": {"noise_variance": 0.0}},
        "grids": {"x": {"lower": 0.0, "upper": 1.0, "points": 41},
                  "y": {"lower": 0.5, "upper": 1.0, "points": 21}},
        "transfer": {"variant": "restriction_bm", "params": {}},
        "greedy": {"n_max": 20},
        "rates": {"window": [2, 10]},
        "oracle": {"mc_samples": 20000, "seed": 0, "selection": "all"},
    }
    cfg.update(sections)
    return cfg


def run_main(tmp_path, command, cfg, extra=()):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return cli.main([command, "--config", str(path), "--outdir", str(tmp_path / "out"), *extra])


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def read_matrix(path):
    rows = read_csv(path)
    cols = np.array(rows[0][1:], dtype=float)
    data = np.array(rows[1:], dtype=float)
    return data[:, 0], cols, data[:, 1:]


def run_files(run_dir):
    out = {}
    for name in sorted(os.listdir(run_dir)):
        if not name.endswith("manifest.json"):
            with open(os.path.join(run_dir, name), "rb") as fh:
                out[name] = fh.read()
    return out


class TestGreedyCommand:
    def test_first_selection(self, tmp_path):
        run_dir = cli.execute("greedy", load("brownian.json"), str(tmp_path))
        rows = read_csv(os.path.join(run_dir, "selection.csv"))
        assert rows[0] == ["step", "index", "point"]
        assert rows[1] == ["0", "100", "1"]
        hist = read_csv(os.path.join(run_dir, "power_history.csv"))
        assert hist[0] == ["step", "point", "sup_power_sq"]
        assert float(hist[1][2]) == 1.0 and float(hist[2][2]) == 0.25
        assert len(hist) == 51

    def test_seventeen_digits(self, tmp_path):
        run_dir = cli.execute("greedy", load("noisy_brownian.json"), str(tmp_path))
        for row in read_csv(os.path.join(run_dir, "power_history.csv"))[1:]:
            v = row[2]
            assert float(v) == float(format(float(v), ".17g"))

    def test_kernel_only_config(self, tmp_path):
        cfg = {"kernel": {"family": "gaussian_rbf", "params": {"lengthscale": 0.2},
                          "domain": [0.0, 1.0]},
               "greedy": {"n_max": 5}}
        run_dir = cli.execute("greedy", cfg, str(tmp_path))
        assert len(read_csv(os.path.join(run_dir, "selection.csv"))) == 6


class TestConditionCommand:
    def test_empty_selection_is_prior(self, tmp_path):
        cfg = small_bm(condition={"selection": "none"})
        run_dir = cli.execute("condition", cfg, str(tmp_path))
        s, t, R = read_matrix(os.path.join(run_dir, "residual_matrix.csv"))
        np.testing.assert_array_equal(R, np.minimum.outer(s, t))
        report = json.loads(open(os.path.join(run_dir, "opnorm.json")).read())
        assert report["opnorm"] == 1.0 and report["argmax"] == 1.0

    def test_full_observation(self, tmp_path):
        run_dir = cli.execute("condition", load("brownian.json"), str(tmp_path))
        s, _, R = read_matrix(os.path.join(run_dir, "residual_matrix.csv"))
        i = int(np.flatnonzero(s == 0.25)[0])
        assert abs(R[i, i] - 0.125) <= 1e-6
        report = json.loads(open(os.path.join(run_dir, "opnorm.json")).read())
        assert report["via_M"]["max_discrepancy"] <= 1e-6
        assert report["opnorm"] == pytest.approx(0.125, abs=1e-6)
        assert report["argmax"] == 0.25

    def test_selection_by_points(self, tmp_path):
        cfg = small_bm(condition={"selection": {"points": [0.5]}})
        run_dir = cli.execute("condition", cfg, str(tmp_path))
        s, _, R = read_matrix(os.path.join(run_dir, "residual_matrix.csv"))
        i = int(np.flatnonzero(s == 0.25)[0])
        assert R[i, i] == pytest.approx(0.125, abs=1e-15)


class TestRatesCommand:
    def test_brownian(self, tmp_path):
        run_dir = cli.execute("rates", load("brownian.json"), str(tmp_path))
        report = json.loads(open(os.path.join(run_dir, "bounds_report.json")).read())
        assert report["pass"]
        assert report["rate_bound"]["pass"] and report["rate_bound"]["hypothesis_met"]
        c = report["constants"]
        assert c["norm_M_probe"] <= c["norm_M"] + 1e-12
        rows = read_csv(os.path.join(run_dir, "decay.csv"))
        assert rows[0] == ["n", "Y_residual", "X_given_Yn_residual"]
        assert rows[1][:2] == ["0", "1"]

    def test_identity_tight(self, tmp_path):
        run_dir = cli.execute("rates", load("identity.json"), str(tmp_path))
        report = json.loads(open(os.path.join(run_dir, "bounds_report.json")).read())
        assert report["pass"]
        assert all(r["tight"] for r in report["per_n"])

    def test_zero_in_window_exits_3(self, tmp_path, capsys):
        assert run_main(tmp_path, "rates", load("eigen.json")) == 3
        assert "n = 2" in capsys.readouterr().err


class TestOracleCommand:
    def test_brownian(self, tmp_path):
        run_dir = cli.execute("oracle", small_bm(), str(tmp_path))
        report = json.loads(open(os.path.join(run_dir, "oracle_report.json")).read())
        assert report["pass"]
        inc = report["incremental_vs_dense"]
        assert inc["max_discrepancy"] <= 1e-6 and inc["max_power_sq_discrepancy"] <= 1e-8
        assert len(inc["per_n"]) == 21


class TestValidation:
    @pytest.mark.parametrize("patch", [
        {"greedy": {"n_max": 0}},
        {"greedy": {"gamma": 1.5}},
        {"oracle": {"mc_samples": 999}},
        {"rates": {"window": [0, 5]}},
        {"model": {"name": "nope"}},
        {"transfer": {"variant": "nope"}},
        {"bogus": 1},
    ])
    def test_exit_2(self, tmp_path, patch):
        assert run_main(tmp_path, "greedy", small_bm(**patch)) == 2

    def test_config_error_names_key(self):
        with pytest.raises(ConfigError, match="greedy.n_max"):
            cli.load_config(small_bm(greedy={"n_max": 0}))

    def test_malformed_json(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{ not json")
        assert cli.main(["greedy", "--config", str(path)]) == 2
        assert "line 1" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert cli.main(["greedy", "--config", str(tmp_path / "absent.json")]) == 2


class TestRunDirectory:
    @pytest.mark.parametrize("command", sorted(cli.COMMANDS))
    def test_byte_identical_reruns(self, tmp_path, command):
        cfg = small_bm()
        a = run_files(cli.execute(command, cfg, str(tmp_path / "a")))
        b = run_files(cli.execute(command, cfg, str(tmp_path / "b")))
        assert a and a == b

    def test_run_id_ignores_output_directory(self):
        a = cli.load_config(small_bm(outputs={"directory": "x"}))
        b = cli.load_config(small_bm(outputs={"directory": "y"}))
        c = cli.load_config(small_bm(greedy={"n_max": 19}))
        assert a.run_id == b.run_id != c.run_id

    def test_manifest_echoes_config(self, tmp_path):
        cfg = small_bm()
        run_dir = cli.execute("greedy", cfg, str(tmp_path))
        manifest = json.loads(open(os.path.join(run_dir, "greedy.manifest.json")).read())
        again = cli.load_config(manifest["config"])
        assert again.run_id == os.path.basename(run_dir)
        for name, digest in manifest["checksums"].items():
            assert len(digest) == 64 and os.path.exists(os.path.join(run_dir, name))

    def test_formats_filter(self, tmp_path):
        cfg = small_bm(outputs={"formats": ["json"]}, condition={"selection": "all"})
        run_dir = cli.execute("condition", cfg, str(tmp_path))
        assert not any(n.endswith(".csv") for n in os.listdir(run_dir))

    def test_thread_env(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(small_bm()))
        env = dict(os.environ, GG_THREADS="1")
        proc = subprocess.run([sys.executable, "-m", "greedycond.cli", "greedy", "--config",
                               str(path), "--outdir", str(tmp_path / "o")],
                              env=env, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        assert os.path.isdir(proc.stdout.strip())
