"""Seeded experiment sweeps: eigenvector convergence, separation phase
diagrams, the glued-copies failure mode, downstream classifiers, and the
testing lower bound — with CSV/JSON persistence and SVG plots.

Every sweep cell owns derived random streams keyed by its grid coordinates,
so cells can run in any order or on a thread pool and the merged output is
identical: records are sorted on write and wall times live only in the run
manifest.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, plots
from .aiml import aiml_laplacian, kernel_weights, mc_weights
from .downstream import (
    LabelPattern,
    LabeledSet,
    assign_labels,
    logistic_gd,
    misclassification,
    separability_margin,
)
from .graph import INDICATOR, build_graph, connected_components, laplacian
from .lowerbound import LowerBoundConfig, chi2_bound, grid_schedule, simulate_lr_test
from .manifolds import (
    MultiManifoldModel,
    analytic_spectrum,
    min_separation,
    model_from_dict,
    model_to_dict,
    parallel_copies_model,
    sample_cloud,
)
from .spectral import (
    EmbeddingMatrix,
    SolverError,
    align_to_reference,
    extend,
    smallest_eigenpairs,
    spectral_cluster,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "SweepResult",
    "run_sweep",
    "run_convergence",
    "run_phase",
    "run_counterexample",
    "run_downstream",
    "run_lowerbound",
    "emit_plots",
    "write_records",
    "write_manifest",
]

KINDS = ("convergence", "phase", "counterexample", "downstream", "lowerbound")
METHODS = ("cml", "aiml-kernel", "aiml-mc")

RECORD_COLUMNS = ["kind", "method", "n", "m", "delta", "r", "seed", "metric", "value", "manifest"]


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    """Declarative description of one sweep.

    `model` holds the full model descriptor for convergence/downstream runs
    and the base manifold descriptor for phase/counterexample runs (the
    parallel copies are constructed per grid cell).  The neighborhood radius
    follows r = c (log n / n)^(1/dim) with dim the full intrinsic dimension
    for the classical method and the invariant dimension for the averaged
    ones; `r_const` sets c per method.
    """

    kind: str
    model: dict = field(default_factory=dict)
    methods: tuple = ("cml",)
    seeds: tuple = (0,)
    n_grid: tuple = ()
    m_grid: tuple = (0,)
    delta_grid: tuple = (0.0,)
    r_const: dict = field(default_factory=dict)
    S: int = 0
    z_ratio: float = 0.1
    pattern: tuple = ()
    n_aug: int = 1024
    cross_n_aug: int = 256
    test_n: int = 1000
    gd_steps: int = 512
    eta: float = 1.0
    tol: float = 1e-7
    max_iter: int = 5000
    restarts: int = 8
    accuracy_threshold: float = 0.95
    alpha: float = 0.05
    trials: int = 1000
    grid_M: int = 0  # 0 means the schedule value
    dim: int = 1
    d_s: int = 1
    out_dir: str = "runs"
    threads: int = 1

    DEFAULT_R_CONST = 2.0

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}")
        if self.kind != "lowerbound":
            if not self.n_grid:
                raise ConfigError("empty n grid")
            if not self.model:
                raise ConfigError("a model descriptor is required")
        else:
            if not self.n_grid:
                raise ConfigError("empty n grid")
        if not self.seeds:
            raise ConfigError("empty seed list")
        if self.kind == "phase" and (not self.delta_grid or self.delta_grid == (0.0,)):
            raise ConfigError("phase sweeps need a separation grid")
        if self.kind == "downstream" and not self.pattern:
            raise ConfigError("downstream sweeps need a label pattern")

    def radius(self, method: str, n: int, dim: int, d_s: int) -> float:
        c = self.r_const.get(method, self.DEFAULT_R_CONST)
        expo = dim if method == "cml" else d_s
        return c * (math.log(n) / n) ** (1.0 / expo)

    def to_dict(self) -> dict:
        out = {}
        for key, val in self.__dict__.items():
            if isinstance(val, tuple):
                val = list(val)
            out[key] = val
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        for key in ("methods", "seeds", "n_grid", "m_grid", "delta_grid", "pattern"):
            if key in kwargs and isinstance(kwargs[key], list):
                kwargs[key] = tuple(kwargs[key])
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg


@dataclass
class SweepResult:
    records: list
    manifest: dict
    run_dir: Optional[Path] = None


def _run_id(config: ExperimentConfig) -> str:
    payload = config.to_dict()
    # execution details do not change the results, keep ids stable across them
    payload.pop("out_dir", None)
    payload.pop("threads", None)
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def _record(kind, method, n, m, delta, r, seed, metric, value, manifest):
    return {
        "kind": kind,
        "method": method,
        "n": n,
        "m": m,
        "delta": delta,
        "r": r,
        "seed": seed,
        "metric": metric,
        "value": float(value),
        "manifest": manifest,
    }


def _embedding_for(method, cloud, r, S, config, seed):
    """Weights + Laplacian + eigensystem for one method; returns the
    embedding matrix and the eigensystem."""
    if method == "cml":
        graph = build_graph(cloud, r, INDICATOR)
        lap = laplacian(graph)
    elif method == "aiml-kernel":
        weights = kernel_weights(cloud, r, cross_seed=seed, cross_n_aug=config.cross_n_aug)
        lap = aiml_laplacian(weights, cloud.model)
    elif method == "aiml-mc":
        weights = mc_weights(cloud, r, n_aug=config.n_aug, seed=seed)
        lap = aiml_laplacian(weights, cloud.model)
    else:
        raise ConfigError(f"unknown method {method!r}")
    eig = smallest_eigenpairs(lap, S, tol=config.tol, max_iter=config.max_iter, seed=seed)
    emb = EmbeddingMatrix(coords=eig.vectors, source=method, r=r, cloud=cloud)
    return emb, eig


def _operator_for(method: str) -> str:
    return "full" if method == "cml" else "signal"


# ---------------------------------------------------------------------------
# sweep kinds
# ---------------------------------------------------------------------------


def run_convergence(config: ExperimentConfig, manifest_id: str = "adhoc") -> SweepResult:
    """Per (n, seed, method): sample, embed, align against the analytic
    spectrum, and record per-vector errors plus eigenvalue errors."""
    config.validate()
    model = model_from_dict(config.model)
    S = config.S or (model.K + 2)

    def cell(args):
        n, seed, method = args
        rows = []
        r = config.radius(method, n, model.d, model.d_s)
        tag = (config.kind, method, n, 0, min_separation(model), r, seed)
        try:
            cloud = sample_cloud(model, n, seed)
            spectrum = analytic_spectrum(model, _operator_for(method), S)
            emb, eig = _embedding_for(method, cloud, r, S, config, seed)
            alignment = align_to_reference(eig, spectrum, cloud)
            graph = build_graph(cloud, r, INDICATOR)
            n_comp = int(connected_components(graph).max()) + 1
            rows.append(_record(*tag, "n_components", n_comp, manifest_id))
            for s in range(S):
                rows.append(_record(*tag, f"align_error_{s + 1}", alignment.errors[s], manifest_id))
                lam = spectrum[s].eigenvalue
                abs_err = abs(eig.normalized[s] - lam)
                rows.append(_record(*tag, f"eig_abs_error_{s + 1}", abs_err, manifest_id))
                if lam > 0:
                    rows.append(_record(*tag, f"eig_rel_error_{s + 1}", abs_err / lam, manifest_id))
        except (SolverError, FloatingPointError):
            rows.append(_record(*tag, "failed", 1.0, manifest_id))
        return rows

    cells = [(n, seed, method) for n in config.n_grid for seed in config.seeds
             for method in config.methods]
    return _run_cells(config, cells, cell, manifest_id)


def run_phase(config: ExperimentConfig, manifest_id: str = "adhoc") -> SweepResult:
    """Clustering accuracy over the (n, separation) grid per method."""
    config.validate()
    base = _base_manifold(config)

    def cell(args):
        n, delta, seed, method = args
        model = parallel_copies_model(base, delta)
        r = config.radius(method, n, model.d, model.d_s)
        tag = (config.kind, method, n, 0, delta, r, seed)
        rows = []
        try:
            cloud = sample_cloud(model, n, seed)
            emb, eig = _embedding_for(method, cloud, r, model.K, config, seed)
            result = spectral_cluster(emb, model.K, restarts=config.restarts,
                                      seed=seed, true_labels=cloud.ks)
            rows.append(_record(*tag, "accuracy", result.accuracy, manifest_id))
            rows.append(
                _record(*tag, "success",
                        1.0 if result.accuracy >= config.accuracy_threshold else 0.0,
                        manifest_id)
            )
        except (SolverError, FloatingPointError):
            rows.append(_record(*tag, "failed", 1.0, manifest_id))
        return rows

    cells = [
        (n, delta, seed, method)
        for n in config.n_grid
        for delta in config.delta_grid
        for seed in config.seeds
        for method in config.methods
    ]
    return _run_cells(config, cells, cell, manifest_id)


def run_counterexample(config: ExperimentConfig, manifest_id: str = "adhoc") -> SweepResult:
    """Copies glued at a fraction of the radius: clustering accuracy stays
    near chance while the spectrum aligns with the single base manifold."""
    config.validate()
    base = _base_manifold(config)
    base_model = MultiManifoldModel(components=(base,), weights=(1.0,))
    S = config.S or 3

    def cell(args):
        n, seed, method = args
        r = config.radius(method, n, base.d, base.d_s)
        z = config.z_ratio * r
        model = parallel_copies_model(base, z)
        tag = (config.kind, method, n, 0, z, r, seed)
        rows = []
        try:
            cloud = sample_cloud(model, n, seed)
            spectrum = analytic_spectrum(base_model, _operator_for(method), S)
            emb, eig = _embedding_for(method, cloud, r, S, config, seed)
            alignment = align_to_reference(eig, spectrum, cloud, ignore_component=True)
            result = spectral_cluster(emb, 2, restarts=config.restarts, seed=seed,
                                      true_labels=cloud.ks)
            rows.append(_record(*tag, "accuracy", result.accuracy, manifest_id))
            for s in range(S):
                rows.append(_record(*tag, f"align_error_{s + 1}", alignment.errors[s], manifest_id))
            rows.append(_record(*tag, "align_error_max", alignment.errors.max(), manifest_id))
        except (SolverError, FloatingPointError):
            rows.append(_record(*tag, "failed", 1.0, manifest_id))
        return rows

    cells = [(n, seed, method) for n in config.n_grid for seed in config.seeds
             for method in config.methods]
    return _run_cells(config, cells, cell, manifest_id)


def _stratified_labeled_cloud(model, m, seed, max_tries=200):
    """Independent labeled sample with every component represented."""
    for attempt in range(max_tries):
        cloud = sample_cloud(model, m, seed * 7919 + 104729 * attempt + 1)
        if len(np.unique(cloud.ks)) == model.K:
            return cloud
    raise RuntimeError("could not draw a stratified labeled set")


def run_downstream(config: ExperimentConfig, manifest_id: str = "adhoc") -> SweepResult:
    """Train logistic regression on frozen representations of independent
    labeled samples and record the held-out misclassification rate.

    Out-of-sample extension uses the widest ball that still cannot reach
    across the component separation, so held-out points average over a
    usable neighborhood without cross-component contamination.
    """
    config.validate()
    model = model_from_dict(config.model)
    pattern = LabelPattern(tuple(config.pattern))
    if len(pattern.signs) != model.K:
        raise ConfigError("pattern length must equal the component count")
    S = model.K
    delta = min_separation(model)

    def cell(args):
        n, m, seed, method = args
        r = config.radius(method, n, model.d, model.d_s)
        r_ext = max(r, 0.95 * delta) if delta > 0 else r
        tag = (config.kind, method, n, m, delta, r, seed)
        rows = []
        try:
            cloud = sample_cloud(model, n, seed)
            emb, eig = _embedding_for(method, cloud, r, S, config, seed)
            labeled = _stratified_labeled_cloud(model, m, seed)
            feats = extend(emb, labeled.xs, r=r_ext)
            data = LabeledSet(feats, assign_labels(pattern, labeled))
            lr = logistic_gd(data, T=config.gd_steps, eta=config.eta)
            test = sample_cloud(model, config.test_n, seed * 31337 + 7)
            xi = misclassification(lr, emb, test, pattern, r=r_ext)
            rows.append(_record(*tag, "xi", xi, manifest_id))
            margin = separability_margin(data)
            rows.append(_record(*tag, "margin",
                                margin if margin is not None else float("nan"),
                                manifest_id))
            rows.append(_record(*tag, "iterations", config.gd_steps, manifest_id))
        except (SolverError, FloatingPointError):
            rows.append(_record(*tag, "failed", 1.0, manifest_id))
        return rows

    cells = [
        (n, m, seed, method)
        for n in config.n_grid
        for m in config.m_grid
        for seed in config.seeds
        for method in config.methods
    ]
    return _run_cells(config, cells, cell, manifest_id)


def run_lowerbound(config: ExperimentConfig, manifest_id: str = "adhoc") -> SweepResult:
    """Chi-squared bound and simulated likelihood-ratio test errors per n."""
    config.validate()

    def cell(args):
        (n, seed) = args
        M = config.grid_M or grid_schedule(n, config.dim)
        cfg = LowerBoundConfig(n=n, dim=config.dim, grid=M)
        bound = chi2_bound(cfg)
        sim = simulate_lr_test(cfg, alpha=config.alpha, trials=config.trials, seed=seed)
        tag = (config.kind, "lr-test", n, 0, cfg.delta, float(M), seed)
        return [
            _record(*tag, "chi2_bound", bound, manifest_id),
            _record(*tag, "type1", sim.type1, manifest_id),
            _record(*tag, "type2", sim.type2, manifest_id),
            _record(*tag, "error_sum", sim.error_sum, manifest_id),
        ]

    cells = [(n, seed) for n in config.n_grid for seed in config.seeds]
    return _run_cells(config, cells, cell, manifest_id)


def _base_manifold(config: ExperimentConfig):
    from .manifolds import manifold_from_dict

    if not config.model:
        raise ConfigError("a base manifold descriptor is required")
    return manifold_from_dict(config.model)


RUNNERS = {
    "convergence": run_convergence,
    "phase": run_phase,
    "counterexample": run_counterexample,
    "downstream": run_downstream,
    "lowerbound": run_lowerbound,
}


def _run_cells(config, cells, cell_fn, manifest_id) -> SweepResult:
    if not cells:
        raise ConfigError("the sweep grid is empty")
    wall = {}

    def timed(args):
        t0 = time.perf_counter()
        rows = cell_fn(args)
        return args, rows, time.perf_counter() - t0

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            outputs = list(pool.map(timed, cells))
    else:
        outputs = [timed(c) for c in cells]
    records = []
    for args, rows, dt in outputs:
        wall[str(args)] = dt
        records.extend(rows)
    records.sort(key=_record_sort_key)
    manifest = {
        "run_id": manifest_id,
        "kind": config.kind,
        "config": config.to_dict(),
        "seeds": list(config.seeds),
        "version": __version__,
        "wall_times": wall,
    }
    return SweepResult(records=records, manifest=manifest)


def _record_sort_key(row):
    return (
        row["kind"],
        row["method"],
        row["n"],
        row["m"],
        row["delta"],
        row["seed"],
        row["metric"],
    )


def run_sweep(config: ExperimentConfig, emit: bool = True) -> SweepResult:
    """Run one sweep, persist records + manifest (+ plots) under
    out_dir/<kind>/<run-id>/."""
    config.validate()
    run_id = _run_id(config)
    result = RUNNERS[config.kind](config, manifest_id=run_id)
    run_dir = Path(config.out_dir) / config.kind / run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    write_records(result.records, run_dir / "records.csv")
    write_manifest(result.manifest, run_dir / "manifest.json")
    if config.kind == "downstream":
        write_downstream_table(result.records, config, run_dir / "downstream.csv")
    if emit:
        emit_plots(result.records, config.kind, run_dir, config=config)
    result.run_dir = run_dir
    return result


def write_downstream_table(records, config: ExperimentConfig, path) -> None:
    """Wide per-cell table (method, n, m, seed, pattern, xi, margin,
    iterations) assembled from the long-format records."""
    cells = {}
    for row in records:
        key = (row["method"], row["n"], row["m"], row["seed"])
        cells.setdefault(key, {})[row["metric"]] = row["value"]
    pattern = "".join("+" if s > 0 else "-" for s in config.pattern)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "n", "m", "seed", "pattern", "xi", "margin",
                         "iterations"])
        for (method, n, m, seed), metrics in sorted(cells.items()):
            writer.writerow(
                [
                    method,
                    n,
                    m,
                    seed,
                    pattern,
                    repr(metrics.get("xi", float("nan"))),
                    repr(metrics.get("margin", float("nan"))),
                    int(metrics.get("iterations", 0)),
                ]
            )


def write_records(records, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORD_COLUMNS)
        for row in sorted(records, key=_record_sort_key):
            writer.writerow(
                [
                    row["kind"],
                    row["method"],
                    row["n"],
                    row["m"],
                    repr(float(row["delta"])),
                    repr(float(row["r"])),
                    row["seed"],
                    row["metric"],
                    repr(float(row["value"])),
                    row["manifest"],
                ]
            )


def read_records(path) -> list:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                {
                    "kind": row["kind"],
                    "method": row["method"],
                    "n": int(row["n"]),
                    "m": int(row["m"]),
                    "delta": float(row["delta"]),
                    "r": float(row["r"]),
                    "seed": int(row["seed"]),
                    "metric": row["metric"],
                    "value": float(row["value"]),
                    "manifest": row["manifest"],
                }
            )
    return out


def write_manifest(manifest, path) -> None:
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def emit_plots(records, kind, out_dir, config: Optional[ExperimentConfig] = None) -> list:
    """Render the plot set for one sweep kind; returns the created paths."""
    if not records:
        raise ValueError("no records to plot")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    if kind == "convergence":
        metrics = sorted(
            {r["metric"] for r in records if r["metric"].startswith("align_error_")}
        )
        path = out_dir / "convergence.svg"
        plots.convergence_plot(records, path, metrics=metrics)
        paths.append(path)
    elif kind == "phase":
        d = config.dim if config else 2
        d_s = config.d_s if config else 1
        if config and config.model:
            base = _base_manifold(config)
            d, d_s = base.d, base.d_s
        path = out_dir / "phase.svg"
        plots.phase_plot(records, path, d=d, d_s=d_s)
        paths.append(path)
    elif kind == "counterexample":
        path = out_dir / "counterexample.svg"
        plots.counterexample_plot(records, path)
        paths.append(path)
    elif kind == "downstream":
        path = out_dir / "downstream.svg"
        plots.downstream_plot(records, path)
        paths.append(path)
    elif kind == "lowerbound":
        path = out_dir / "lowerbound.svg"
        plots.lowerbound_plot(records, path)
        paths.append(path)
    else:
        raise ValueError(f"unknown sweep kind {kind!r}")
    return paths
