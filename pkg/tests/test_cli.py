import csv
import json
import subprocess
import sys

import pytest

from manisep.cli import main
from manisep.manifolds import Circle, parallel_copies_model, model_to_dict, save_model


@pytest.fixture
def model_path(tmp_path):
    path = tmp_path / "model.json"
    save_model(parallel_copies_model(Circle(), 0.5), path)
    return path


def run_cli(*args):
    return main([str(a) for a in args])


class TestSampleCommand:
    def test_writes_cloud(self, model_path, tmp_path):
        out = tmp_path / "cloud.csv"
        code = run_cli("--quiet", "sample", "--model", model_path, "--n", 50,
                       "--seed", 3, "--out", out)
        assert code == 0
        rows = list(csv.DictReader(open(out)))
        assert len(rows) == 50
        assert set(r["k"] for r in rows) <= {"0", "1"}

    def test_missing_model_is_config_error(self, tmp_path):
        code = run_cli("--quiet", "sample", "--model", tmp_path / "nope.json",
                       "--n", 10, "--out", tmp_path / "c.csv")
        assert code == 2


class TestEmbedCommands:
    def test_embed_writes_embedding_and_eigenvalues(self, model_path, tmp_path):
        out = tmp_path / "emb"
        code = run_cli("--quiet", "embed", "--model", model_path, "--n", 300,
                       "--seed", 0, "--r", 0.2, "--S", 2, "--out", out)
        assert code == 0
        eigs = list(csv.DictReader(open(out / "eigenvalues.csv")))
        assert len(eigs) == 2
        assert all(abs(float(r["normalized"])) <= 1e-9 for r in eigs)
        emb = list(csv.DictReader(open(out / "embedding.csv")))
        assert len(emb) == 300
        assert "coord_1" in emb[0]

    def test_aiml_embed_kernel_mode(self, tmp_path):
        from manisep.manifolds import Product

        path = tmp_path / "torus.json"
        save_model(parallel_copies_model(Product(Circle(), Circle()), 0.4), path)
        out = tmp_path / "emb"
        code = run_cli("--quiet", "aiml-embed", "--model", path, "--n", 400,
                       "--seed", 0, "--r", 0.2, "--S", 2, "--mode", "kernel",
                       "--out", out, "--graph-out", tmp_path / "w.csv")
        assert code == 0
        header = open(tmp_path / "w.csv").readline().strip()
        assert header == "i,j,w,mode"

    def test_cluster_on_embedding(self, model_path, tmp_path):
        out = tmp_path / "emb"
        run_cli("--quiet", "embed", "--model", model_path, "--n", 300, "--seed", 0,
                "--r", 0.2, "--S", 2, "--out", out)
        code = run_cli("--quiet", "cluster", "--embedding", out / "embedding.csv",
                       "--k", 2, "--out", tmp_path / "labels.csv")
        assert code == 0
        labels = list(csv.DictReader(open(tmp_path / "labels.csv")))
        assert len(labels) == 300

    def test_solver_failure_is_numeric_exit(self, model_path, tmp_path):
        code = run_cli("--quiet", "embed", "--model", model_path, "--n", 30,
                       "--seed", 0, "--r", 0.2, "--S", 31, "--out", tmp_path / "e")
        assert code == 3


class TestLowerboundCommand:
    def test_writes_schema_csv(self, tmp_path):
        out = tmp_path / "lb.csv"
        code = run_cli("--quiet", "lowerbound", "--n", 200, "--dim", 1,
                       "--trials", 150, "--out", out)
        assert code == 0
        rows = list(csv.DictReader(open(out)))
        assert list(rows[0]) == ["dim", "n", "M", "Delta", "chi2_bound", "alpha",
                                 "type1", "type2", "error_sum", "trials"]


class TestSweepCommand:
    def _config(self, tmp_path):
        data = {
            "kind": "convergence",
            "model": model_to_dict(parallel_copies_model(Circle(), 0.5)),
            "methods": ["cml"],
            "seeds": [0],
            "n_grid": [300],
            "r_const": {"cml": 16.0},
            "S": 2,
            "out_dir": str(tmp_path / "runs"),
        }
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(data))
        return path

    def test_sweep_json_config(self, tmp_path):
        path = self._config(tmp_path)
        code = run_cli("--quiet", "sweep", "convergence", "--config", path)
        assert code == 0
        runs = list((tmp_path / "runs" / "convergence").iterdir())
        assert len(runs) == 1
        assert (runs[0] / "records.csv").exists()
        assert (runs[0] / "manifest.json").exists()

    def test_sweep_toml_config(self, tmp_path):
        toml_path = tmp_path / "cfg.toml"
        toml_path.write_text(
            "\n".join(
                [
                    'kind = "lowerbound"',
                    "seeds = [0]",
                    "n_grid = [150]",
                    "dim = 1",
                    "trials = 120",
                    f'out_dir = "{tmp_path / "runs"}"',
                ]
            )
        )
        code = run_cli("--quiet", "sweep", "lowerbound", "--config", toml_path)
        assert code == 0
        runs = list((tmp_path / "runs" / "lowerbound").iterdir())
        assert (runs[0] / "records.csv").exists()

    def test_kind_mismatch_rejected(self, tmp_path):
        path = self._config(tmp_path)
        assert run_cli("--quiet", "sweep", "phase", "--config", path) == 2

    def test_bad_config_rejected(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"kind": "convergence", "n_grid": []}))
        assert run_cli("--quiet", "sweep", "convergence", "--config", path) == 2

    def test_unknown_extension_rejected(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text("kind: convergence")
        assert run_cli("--quiet", "sweep", "convergence", "--config", path) == 2

    def test_plot_from_records(self, tmp_path):
        path = self._config(tmp_path)
        run_cli("--quiet", "sweep", "convergence", "--config", path)
        runs = list((tmp_path / "runs" / "convergence").iterdir())
        code = run_cli("--quiet", "plot", "--records", runs[0] / "records.csv",
                       "--kind", "convergence", "--out", tmp_path / "plots")
        assert code == 0
        assert (tmp_path / "plots" / "convergence.svg").exists()


def test_console_entry_point(tmp_path, model_path):
    out = tmp_path / "cloud.csv"
    proc = subprocess.run(
        [sys.executable, "-m", "manisep.cli", "--quiet", "sample", "--model",
         str(model_path), "--n", "20", "--out", str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert out.exists()
