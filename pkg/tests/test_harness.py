import hashlib
import json

import numpy as np
import pytest

from manisep.harness import (
    ConfigError,
    ExperimentConfig,
    emit_plots,
    read_records,
    run_sweep,
    write_records,
)
from manisep.manifolds import (
    Circle,
    Product,
    manifold_to_dict,
    model_to_dict,
    parallel_copies_model,
)


def sep_circles_config(**overrides):
    base = dict(
        kind="convergence",
        model=model_to_dict(parallel_copies_model(Circle(), 0.5)),
        methods=("cml",),
        seeds=(0, 1),
        n_grid=(300,),
        r_const={"cml": 16.0},
        S=2,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def digest(path):
    return hashlib.sha256(open(path, "rb").read()).hexdigest()


class TestConfig:
    def test_unknown_kind_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(kind="nope", n_grid=(10,), seeds=(0,)).validate()

    def test_empty_n_grid_rejected(self):
        cfg = sep_circles_config(n_grid=())
        with pytest.raises(ConfigError):
            cfg.validate()

    def test_unknown_method_rejected(self):
        cfg = sep_circles_config(methods=("cml", "magic"))
        with pytest.raises(ConfigError):
            cfg.validate()

    def test_phase_needs_delta_grid(self):
        cfg = ExperimentConfig(
            kind="phase", model=manifold_to_dict(Circle()), n_grid=(100,), seeds=(0,)
        )
        with pytest.raises(ConfigError):
            cfg.validate()

    def test_downstream_needs_pattern(self):
        cfg = ExperimentConfig(
            kind="downstream",
            model=model_to_dict(parallel_copies_model(Circle(), 0.5)),
            n_grid=(100,),
            seeds=(0,),
        )
        with pytest.raises(ConfigError):
            cfg.validate()

    def test_from_dict_round_trip(self):
        cfg = sep_circles_config()
        back = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
        assert back.to_dict() == cfg.to_dict()

    def test_from_dict_rejects_unknown_keys(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"kind": "convergence", "bogus": 1})

    def test_radius_schedule_uses_signal_dim_for_averaged(self):
        cfg = sep_circles_config(r_const={"cml": 2.0, "aiml-kernel": 2.0})
        r_full = cfg.radius("cml", 1000, dim=2, d_s=1)
        r_signal = cfg.radius("aiml-kernel", 1000, dim=2, d_s=1)
        assert r_signal < r_full  # exponent 1 vs 1/2 on a small rate
        assert r_full == pytest.approx(2.0 * (np.log(1000) / 1000) ** 0.5)


class TestSweeps:
    def test_records_and_manifest(self, tmp_path):
        cfg = sep_circles_config(out_dir=str(tmp_path))
        res = run_sweep(cfg)
        assert (res.run_dir / "records.csv").exists()
        assert (res.run_dir / "manifest.json").exists()
        assert (res.run_dir / "convergence.svg").exists()
        manifest = json.loads((res.run_dir / "manifest.json").read_text())
        assert manifest["run_id"] == res.manifest["run_id"]
        assert manifest["config"]["kind"] == "convergence"
        assert manifest["wall_times"]
        # every record row is traceable to the manifest
        assert all(row["manifest"] == manifest["run_id"] for row in res.records)

    def test_byte_identical_reruns(self, tmp_path):
        cfg_a = sep_circles_config(out_dir=str(tmp_path / "a"))
        cfg_b = sep_circles_config(out_dir=str(tmp_path / "b"))
        res_a = run_sweep(cfg_a)
        res_b = run_sweep(cfg_b)
        assert digest(res_a.run_dir / "records.csv") == digest(res_b.run_dir / "records.csv")
        assert digest(res_a.run_dir / "convergence.svg") == digest(
            res_b.run_dir / "convergence.svg"
        )

    def test_thread_pool_matches_sequential(self, tmp_path):
        res_1 = run_sweep(sep_circles_config(out_dir=str(tmp_path / "s"), threads=1))
        res_4 = run_sweep(sep_circles_config(out_dir=str(tmp_path / "t"), threads=4))
        assert digest(res_1.run_dir / "records.csv") == digest(res_4.run_dir / "records.csv")

    def test_exact_indicator_regime_errors(self, tmp_path):
        cfg = sep_circles_config(out_dir=str(tmp_path))
        res = run_sweep(cfg, emit=False)
        errs = [r["value"] for r in res.records if r["metric"].startswith("align_error")]
        assert len(errs) == 4
        assert max(errs) <= 0.2  # population-normalized indicators, small n

    def test_read_records_round_trip(self, tmp_path):
        cfg = sep_circles_config(out_dir=str(tmp_path))
        res = run_sweep(cfg, emit=False)
        path = tmp_path / "records.csv"
        write_records(res.records, path)
        back = read_records(path)
        assert back == sorted(res.records, key=lambda r: (
            r["kind"], r["method"], r["n"], r["m"], r["delta"], r["seed"], r["metric"]
        ))

    def test_phase_sweep_records_success(self, tmp_path):
        cfg = ExperimentConfig(
            kind="phase",
            model=manifold_to_dict(Product(Circle(), Circle())),
            methods=("aiml-kernel",),
            seeds=(0,),
            n_grid=(500,),
            delta_grid=(0.4,),
            r_const={"aiml-kernel": 20.0},
            out_dir=str(tmp_path),
        )
        res = run_sweep(cfg)
        acc = [r for r in res.records if r["metric"] == "accuracy"]
        succ = [r for r in res.records if r["metric"] == "success"]
        assert len(acc) == len(succ) == 1
        assert acc[0]["value"] >= 0.95
        assert succ[0]["value"] == 1.0

    def test_downstream_sweep_runs(self, tmp_path):
        cfg = ExperimentConfig(
            kind="downstream",
            model=model_to_dict(parallel_copies_model(Product(Circle(), Circle()), 0.5)),
            methods=("aiml-kernel",),
            seeds=(0,),
            n_grid=(500,),
            m_grid=(8,),
            r_const={"aiml-kernel": 18.0},
            pattern=(1, -1),
            gd_steps=64,
            test_n=200,
            out_dir=str(tmp_path),
        )
        res = run_sweep(cfg)
        xi = [r["value"] for r in res.records if r["metric"] == "xi"]
        assert len(xi) == 1
        assert xi[0] <= 0.05
        table = (res.run_dir / "downstream.csv").read_text().splitlines()
        assert table[0] == "method,n,m,seed,pattern,xi,margin,iterations"
        assert table[1].startswith("aiml-kernel,500,8,0,+-,")

    def test_monte_carlo_method_path(self, tmp_path):
        cfg = ExperimentConfig(
            kind="phase",
            model=manifold_to_dict(Product(Circle(), Circle())),
            methods=("aiml-mc",),
            seeds=(0,),
            n_grid=(300,),
            delta_grid=(0.4,),
            r_const={"aiml-mc": 16.0},
            n_aug=64,
            out_dir=str(tmp_path),
        )
        res = run_sweep(cfg, emit=False)
        acc = [r for r in res.records if r["metric"] == "accuracy"]
        assert len(acc) == 1
        assert acc[0]["value"] >= 0.9

    def test_lowerbound_sweep(self, tmp_path):
        cfg = ExperimentConfig(
            kind="lowerbound", n_grid=(200,), seeds=(0,), dim=1, trials=150,
            out_dir=str(tmp_path),
        )
        res = run_sweep(cfg)
        metrics = {r["metric"] for r in res.records}
        assert {"chi2_bound", "type1", "type2", "error_sum"} <= metrics

    def test_failed_cells_recorded_not_raised(self, tmp_path):
        # S larger than n makes the solver fail; sweep keeps going
        cfg = sep_circles_config(S=301, n_grid=(300,), out_dir=str(tmp_path))
        res = run_sweep(cfg, emit=False)
        assert all(r["metric"] == "failed" for r in res.records)


class TestPlots:
    def test_empty_records_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            emit_plots([], "convergence", tmp_path)

    def test_unknown_kind_rejected(self, tmp_path):
        rec = [dict(kind="x", method="cml", n=1, m=0, delta=0.0, r=0.1, seed=0,
                    metric="accuracy", value=1.0, manifest="m")]
        with pytest.raises(ValueError):
            emit_plots(rec, "mystery", tmp_path)

    def test_rerender_is_byte_identical(self, tmp_path):
        cfg = sep_circles_config(out_dir=str(tmp_path))
        res = run_sweep(cfg, emit=False)
        emit_plots(res.records, "convergence", tmp_path / "p1")
        emit_plots(res.records, "convergence", tmp_path / "p2")
        assert digest(tmp_path / "p1" / "convergence.svg") == digest(
            tmp_path / "p2" / "convergence.svg"
        )
