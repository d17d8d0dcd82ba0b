"""Command-line entry points.

Exit codes: 0 on success, 2 for configuration problems, 3 for numeric
failures (eigensolver breakdown, diverging loss).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .aiml import aiml_laplacian, kernel_weights, mc_weights
from .graph import INDICATOR, build_graph, export_graph_csv, laplacian
from .harness import (
    ConfigError,
    ExperimentConfig,
    emit_plots,
    read_records,
    run_sweep,
)
from .lowerbound import LowerBoundConfig, chi2_bound, grid_schedule, simulate_lr_test
from .manifolds import (
    cloud_from_csv,
    cloud_to_csv,
    load_model,
    sample_cloud,
)
from .spectral import (
    EmbeddingMatrix,
    SolverError,
    eigenvalues_to_csv,
    embedding_to_csv,
    smallest_eigenpairs,
    spectral_cluster,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_bytes()
    if path.suffix.lower() == ".json":
        data = json.loads(text)
    elif path.suffix.lower() == ".toml":
        try:
            import tomllib  # py >= 3.11
        except ImportError:
            import tomli as tomllib
        data = tomllib.loads(text.decode())
    else:
        raise ConfigError(f"config must be .json or .toml, got {path.suffix!r}")
    try:
        return ExperimentConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _load_cloud(args):
    model = load_model(args.model)
    if getattr(args, "cloud", None):
        return cloud_from_csv(args.cloud, model)
    return sample_cloud(model, args.n, args.seed)


def cmd_sample(args) -> int:
    model = load_model(args.model)
    cloud = sample_cloud(model, args.n, args.seed)
    cloud_to_csv(cloud, args.out)
    if not args.quiet:
        counts = cloud.component_counts()
        print(f"wrote {cloud.n} samples ({'/'.join(map(str, counts))} per component) to {args.out}")
    return EXIT_OK


def _write_embedding(args, eig, cloud, source):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    emb = EmbeddingMatrix(coords=eig.vectors, source=source, r=args.r, cloud=cloud)
    embedding_to_csv(emb, out / "embedding.csv")
    eigenvalues_to_csv(eig, out / "eigenvalues.csv")
    if not args.quiet:
        print(f"eigenvalues (normalized): {np.array2string(eig.normalized, precision=6)}")
        print(f"wrote embedding.csv and eigenvalues.csv to {out}")


def cmd_embed(args) -> int:
    cloud = _load_cloud(args)
    graph = build_graph(cloud, args.r, INDICATOR)
    if args.graph_out:
        export_graph_csv(graph, args.graph_out)
    lap = laplacian(graph)
    eig = smallest_eigenpairs(lap, args.S, tol=args.tol, seed=args.seed)
    _write_embedding(args, eig, cloud, "cml")
    return EXIT_OK


def cmd_aiml_embed(args) -> int:
    cloud = _load_cloud(args)
    if args.mode == "kernel":
        weights = kernel_weights(cloud, args.r, cross_seed=args.seed)
    else:
        weights = mc_weights(cloud, args.r, n_aug=args.n_aug, seed=args.seed)
    if args.graph_out:
        export_graph_csv(weights, args.graph_out, mode=args.mode)
    lap = aiml_laplacian(weights, cloud.model)
    eig = smallest_eigenpairs(lap, args.S, tol=args.tol, seed=args.seed)
    _write_embedding(args, eig, cloud, f"aiml-{args.mode}")
    return EXIT_OK


def cmd_cluster(args) -> int:
    rows = []
    with open(args.embedding, newline="") as fh:
        import csv as _csv

        reader = _csv.DictReader(fh)
        coord_cols = [c for c in reader.fieldnames if c.startswith("coord_")]
        truth = []
        for row in reader:
            rows.append([float(row[c]) for c in coord_cols])
            truth.append(int(row["true_k"]))
    emb = EmbeddingMatrix(coords=np.asarray(rows), source="file", r=0.0)
    result = spectral_cluster(emb, args.k, restarts=args.restarts, seed=args.seed,
                              true_labels=np.asarray(truth))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            import csv as _csv

            writer = _csv.writer(fh)
            writer.writerow(["index", "label"])
            for i, lab in enumerate(result.labels):
                writer.writerow([i, int(lab)])
    if not args.quiet:
        print(f"clustering accuracy vs true components: {result.accuracy:.4f}")
    return EXIT_OK


def cmd_downstream(args) -> int:
    config = load_config(args.config)
    if config.kind != "downstream":
        raise ConfigError("downstream command needs a downstream config")
    _apply_overrides(config, args)
    result = run_sweep(config)
    if not args.quiet:
        print(f"wrote {len(result.records)} records to {result.run_dir}")
    return EXIT_OK


def cmd_lowerbound(args) -> int:
    M = args.grid or grid_schedule(args.n, args.dim)
    cfg = LowerBoundConfig(n=args.n, dim=args.dim, grid=M)
    bound = chi2_bound(cfg)
    sim = simulate_lr_test(cfg, alpha=args.alpha, trials=args.trials, seed=args.seed)
    if args.out:
        import csv as _csv

        with open(args.out, "w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(
                ["dim", "n", "M", "Delta", "chi2_bound", "alpha", "type1", "type2",
                 "error_sum", "trials"]
            )
            writer.writerow(
                [args.dim, args.n, M, repr(cfg.delta), repr(bound), repr(args.alpha),
                 repr(sim.type1), repr(sim.type2), repr(sim.error_sum), args.trials]
            )
    if not args.quiet:
        print(f"chi2 bound {bound:.6g}; simulated error sum {sim.error_sum:.4f} "
              f"(type I {sim.type1:.4f}, type II {sim.type2:.4f})")
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    if config.kind != args.kind:
        raise ConfigError(
            f"config kind {config.kind!r} does not match sweep kind {args.kind!r}"
        )
    _apply_overrides(config, args)
    result = run_sweep(config)
    if not args.quiet:
        print(f"run {result.manifest['run_id']}: {len(result.records)} records in {result.run_dir}")
    return EXIT_OK


def cmd_plot(args) -> int:
    records = read_records(args.records)
    paths = emit_plots(records, args.kind, args.out)
    if not args.quiet:
        for p in paths:
            print(f"wrote {p}")
    return EXIT_OK


def _apply_overrides(config: ExperimentConfig, args) -> None:
    if getattr(args, "out", None):
        config.out_dir = args.out
    if getattr(args, "threads", None):
        config.threads = args.threads
    if getattr(args, "seed", None) is not None:
        config.seeds = (args.seed,)
    config.validate()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="manisep",
        description="spectral multi-manifold representations and experiments",
    )
    parser.add_argument("--quiet", action="store_true", help="suppress chatter")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw a point cloud from a model")
    p.add_argument("--model", required=True, help="model JSON document")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="cloud CSV path")
    p.set_defaults(func=cmd_sample)

    for name, fn in (("embed", cmd_embed), ("aiml-embed", cmd_aiml_embed)):
        p = sub.add_parser(name, help=f"{name} a sampled cloud")
        p.add_argument("--model", required=True)
        p.add_argument("--cloud", help="existing cloud CSV (else sample fresh)")
        p.add_argument("--n", type=int, default=1000)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--r", type=float, required=True)
        p.add_argument("--S", type=int, default=3)
        p.add_argument("--tol", type=float, default=1e-7)
        p.add_argument("--graph-out", help="optional weight triplet CSV")
        p.add_argument("--out", required=True, help="output directory")
        if name == "aiml-embed":
            p.add_argument("--mode", choices=("kernel", "mc"), default="kernel")
            p.add_argument("--n-aug", type=int, default=1024)
        p.set_defaults(func=fn)

    p = sub.add_parser("cluster", help="k-means on an embedding CSV")
    p.add_argument("--embedding", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="labels CSV path")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("downstream", help="run a downstream sweep from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_downstream)

    p = sub.add_parser("lowerbound", help="chi-squared bound and LR-test simulation")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--grid", type=int, default=0, help="grid count M (0 = schedule)")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="results CSV path")
    p.set_defaults(func=cmd_lowerbound)

    p = sub.add_parser("sweep", help="run a full experiment sweep")
    p.add_argument("kind", choices=("convergence", "phase", "counterexample",
                                    "downstream", "lowerbound"))
    p.add_argument("--config", required=True, help="TOML or JSON config")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="re-render plots from a records CSV")
    p.add_argument("--records", required=True)
    p.add_argument("--kind", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
