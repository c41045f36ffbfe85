"""Command-line entry points: generate / discover / benchmark.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 internal
numerical failure.  The FRITL_LOG environment variable (error | info |
debug) controls stderr verbosity.  All commands are deterministic given the
config file and seed; the discover log file carries wall-clock timings and
is the one output excluded from byte-for-byte reproducibility.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from fritl.config import (
    BenchmarkConfig,
    ConfigError,
    PipelineConfig,
    benchmark_config_from,
    parse_config_file,
    pipeline_config_from,
    with_stage_prefix,
)
from fritl.graph import GraphError, MixedGraph, emit_graph_text
from fritl.metrics import (
    METRICS_CSV_HEADER,
    arrowhead_metrics,
    latent_pair_metrics,
    metrics_rows,
)
from fritl.pipeline import discover, relabel_groups
from fritl.stats import DataFormatError, StatsError, read_data_csv, write_data_csv
from fritl.synth import GeneratorConfig, GeneratorError, generate_model, sample_data

log = logging.getLogger("fritl")


class UsageError(Exception):
    pass


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _setup_logging() -> None:
    level = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("FRITL_LOG", "error").lower(), logging.ERROR
    )
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(message)s")
    log.setLevel(level)


def _load_config(path: str | None) -> dict[str, str]:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {path}")
    return parse_config_file(p)


def _generator_config(mapping: dict[str, str], seed: int) -> tuple[GeneratorConfig, int]:
    def get(key: str, cast, default):
        return cast(mapping[key]) if key in mapping else default

    cfg = GeneratorConfig(
        n_observed=get("n_observed", int, 10),
        avg_indegree=get("avg_indegree", float, 2.0),
        latent_ratio=get("latent_ratio", float, 0.2),
        max_latent_children=get("max_latent_children", int, 3),
        coeff_range=(get("coeff_min", float, 0.2), get("coeff_max", float, 1.0)),
        noise=get("noise", str, "uniform"),
        seed=seed,
    )
    n_samples = get("n_samples", int, 1000)
    return cfg, n_samples


def _write_model_files(model, out_dir: Path) -> None:
    from fritl.graph import LatentGroup

    observed = model.observed_dag()
    latent_groups = [
        LatentGroup(name, frozenset(model.latent_children(name)))
        for name in model.latent_names
    ]
    _atomic_write(out_dir / "model.graph", emit_graph_text(observed, latent_groups))
    _atomic_write(out_dir / "truth.dag", emit_graph_text(observed))


def cmd_generate(args: argparse.Namespace) -> int:
    mapping = _load_config(args.config)
    pipeline = pipeline_config_from(mapping, seed=args.seed)
    cfg, n_samples = _generator_config(mapping, pipeline.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = generate_model(cfg)
    data = sample_data(model, n_samples, seed=cfg.seed)
    _write_model_files(model, out_dir)
    write_data_csv(data, out_dir / "data.csv")
    log.info("wrote model.graph, truth.dag, data.csv to %s", out_dir)
    return 0


def _provenance_csv(state) -> str:
    lines = ["node_a,node_b,provenance"]
    for key in sorted(k for k in state.provenance if isinstance(k[0], str) and k[0] != "latent"):
        a, b = key
        lines.append(f"{a},{b},{state.provenance[key]}")
    return "\n".join(lines) + "\n"


def cmd_discover(args: argparse.Namespace) -> int:
    data_path = Path(args.data)
    if not data_path.is_file() or data_path.stat().st_size == 0:
        raise UsageError(f"data file missing or empty: {args.data}")
    mapping = _load_config(args.config)
    stages = tuple(args.stages.split(",")) if args.stages else None
    config = pipeline_config_from(mapping, seed=args.seed, alpha_ci=args.alpha,
                                  alpha_noise=args.alpha, stages=stages)
    data = read_data_csv(data_path)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    file_handler = logging.FileHandler(out_dir / "discover.log", mode="w", encoding="utf-8")
    file_handler.setLevel(logging.INFO)
    file_handler.setFormatter(logging.Formatter("%(message)s"))
    log.addHandler(file_handler)
    previous_level = log.level
    log.setLevel(min(previous_level, logging.INFO) or logging.INFO)
    try:
        run = discover(data, config)
        for line in run.state.log:
            log.info("%s", line)
        for label, stage in run.stages.items():
            log.info("timing %s %.3f s", label, stage.seconds)
    finally:
        log.removeHandler(file_handler)
        file_handler.close()
        log.setLevel(previous_level)

    _atomic_write(out_dir / "estimated.graph",
                  emit_graph_text(run.graph, run.latent_groups))
    _atomic_write(out_dir / "provenance.csv", _provenance_csv(run.state))
    return 0


def _benchmark_point(
    point_dir: Path,
    gen_template: GeneratorConfig,
    n_samples: int,
    replicates: int,
    pipeline: PipelineConfig,
    jobs: int,
) -> None:
    point_dir.mkdir(parents=True, exist_ok=True)

    def one(replicate: int) -> list[str] | None:
        seed = pipeline.seed + replicate
        gen = replace(gen_template, seed=seed)
        try:
            model = generate_model(gen)
            data = sample_data(model, n_samples, seed=seed)
            run = discover(data, replace(pipeline, seed=seed))
        except Exception as exc:  # a failed replicate is logged and skipped
            log.error("replicate %d failed: %s", replicate, exc)
            return None
        truth = model.observed_dag()
        rows: list[str] = []
        for label, stage in run.stages.items():
            reports = {
                "arrowhead": arrowhead_metrics(stage.graph, truth),
                "latent_pair": latent_pair_metrics(
                    stage.latent_groups, model, stage.graph
                ),
            }
            rows.extend(metrics_rows(seed, label, reports))
        return rows

    results: list[list[str] | None]
    if jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, range(replicates)))
    else:
        results = [one(r) for r in range(replicates)]
    rows = [row for chunk in results if chunk for row in chunk]
    failed = sum(1 for chunk in results if chunk is None)
    if failed:
        log.error("%d of %d replicates failed and were skipped", failed, replicates)
    _atomic_write(point_dir / "metrics.csv",
                  "\n".join([METRICS_CSV_HEADER, *rows]) + "\n")


def cmd_benchmark(args: argparse.Namespace) -> int:
    mapping = _load_config(args.config)
    pipeline = pipeline_config_from(
        mapping, seed=args.seed, alpha_ci=args.alpha, alpha_noise=args.alpha,
        stages=tuple(args.stages.split(",")) if args.stages else None,
    )
    bench = benchmark_config_from(mapping, jobs=args.jobs)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    indegrees = bench.indegree_sweep or (bench.avg_indegree,)
    ratios = bench.latent_ratio_sweep or (bench.latent_ratio,)
    points = [(i, p) for i in indegrees for p in ratios]
    for indegree, ratio in points:
        gen = GeneratorConfig(
            n_observed=bench.n_observed,
            avg_indegree=indegree,
            latent_ratio=ratio,
            max_latent_children=bench.max_latent_children,
            coeff_range=(bench.coeff_min, bench.coeff_max),
            noise=bench.noise,
            seed=pipeline.seed,
        )
        point_dir = (
            out_dir
            if len(points) == 1
            else out_dir / f"indegree={indegree:g}_p={ratio:g}"
        )
        log.info("benchmark point indegree=%g p=%g", indegree, ratio)
        _benchmark_point(
            point_dir, gen, bench.n_samples, bench.replicates, pipeline, bench.jobs
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fritl",
        description="Hybrid causal structure learning with latent confounders",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--seed", type=int, default=None, help="override the seed")
        p.add_argument("--alpha", type=float, default=None,
                       help="override both significance levels")
        p.add_argument("--stages", default=None,
                       help="comma-separated stage prefix, e.g. I,II")

    g = sub.add_parser("generate", help="draw a ground-truth model and a dataset")
    common(g)
    g.add_argument("out_dir")
    g.set_defaults(func=cmd_generate)

    d = sub.add_parser("discover", help="run the discovery pipeline on a CSV")
    common(d)
    d.add_argument("data", help="input data.csv")
    d.add_argument("out_dir")
    d.set_defaults(func=cmd_discover)

    b = sub.add_parser("benchmark", help="generate/discover/evaluate loops")
    common(b)
    b.add_argument("--jobs", type=int, default=None, help="concurrent replicates")
    b.add_argument("out_dir")
    b.set_defaults(func=cmd_benchmark)
    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (UsageError, ConfigError, GeneratorError) as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataFormatError as exc:
        log.error("%s", exc)
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (StatsError, GraphError, np.linalg.LinAlgError, FloatingPointError) as exc:
        log.error("%s", exc)
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
