"""Command line entry point: ``gsema run|score|meta|simulate|permute``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Sequence

from .config import RunConfig, build_run_config
from .const import (
    DEFAULT_ACTIVITY_THRESHOLD,
    DEFAULT_ALPHA,
    DEFAULT_ITERATIONS,
    DEFAULT_MIN_SET_SIZE,
    DEFAULT_MODEL,
    DEFAULT_SEED,
    DEFAULT_SSE_METHOD,
    DEFAULT_SSGSEA_ALPHA,
    EFFECTS_FILE,
    EXIT_OK,
    FILTER_REPORT_FILE,
    KERNEL_GAUSSIAN,
    KERNEL_POISSON,
    MANIFEST_FILE,
    MODEL_FEM,
    MODEL_REM,
    PERMUTATION_FILE,
    PERMUTATION_SUMMARY_FILE,
    RESULTS_FILE,
    RUN_METADATA_FILE,
    SSE_METHODS,
    STANDARDIZE_MATRIX,
    STANDARDIZE_ROW,
)
from .coordinator import AnalysisResult, GsemaCoordinator
from .errors import ConfigError, GsemaError
from .ingest import ManifestEntry, load_manifest, parse_expression_tsv, parse_gmt, write_manifest
from .permute import run_permutation_suite
from .report import save_json, write_effects_tsv, write_results_tsv, write_run_metadata, write_tsv
from .simulate import SimConfig, simulate_studies, write_simulation
from .sse import load_score_manifest, write_scores_tsv

logger = logging.getLogger(__name__)


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="YAML", help="run file with the same keys as the flags")
    common.add_argument("--threads", metavar="N", help="worker threads, or 'auto' (default: 1)")
    common.add_argument("--seed", type=int, metavar="N", help=f"master seed (default: {DEFAULT_SEED})")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    common.add_argument("-q", "--quiet", action="store_true", help="warnings only, no progress bars")
    return common


def _pipeline_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    sse = p.add_argument_group("scoring")
    sse.add_argument("--sse", choices=SSE_METHODS, help=f"single-sample method (default: {DEFAULT_SSE_METHOD})")
    sse.add_argument(
        "--min-set-size",
        type=int,
        metavar="N",
        help=f"minimum measured genes per set (default: {DEFAULT_MIN_SET_SIZE})",
    )
    sse.add_argument("--max-set-size", type=int, metavar="N", help="maximum measured genes per set (default: none)")
    sse.add_argument(
        "--ssgsea-weight",
        type=float,
        metavar="A",
        help=f"ssGSEA rank weight exponent (default: {DEFAULT_SSGSEA_ALPHA})",
    )
    sse.add_argument("--ssgsea-normalize", action="store_const", const=True, help="divide ssGSEA scores by their range")
    sse.add_argument("--gsva-kernel", choices=[KERNEL_GAUSSIAN, KERNEL_POISSON], help="GSVA kernel (default: gaussian)")
    sse.add_argument(
        "--gsva-max-deviation",
        dest="gsva_max_diff",
        action="store_const",
        const=False,
        help="GSVA signed maximum deviation instead of max-diff",
    )
    sse.add_argument(
        "--singscore-undirected",
        dest="singscore_directed",
        action="store_const",
        const=False,
        help="singscore on distance from the median rank",
    )

    flt = p.add_argument_group("filtering")
    flt.add_argument(
        "--filter-threshold",
        type=float,
        metavar="T",
        help=f"minimum absolute group median activity (default: {DEFAULT_ACTIVITY_THRESHOLD})",
    )
    flt.add_argument("--min-studies", type=int, metavar="N", help="studies a pathway must survive in (default: all)")
    flt.add_argument("--no-standardize", dest="standardize", action="store_const", const=False, help="skip score standardization")
    flt.add_argument(
        "--standardize-mode",
        choices=[STANDARDIZE_ROW, STANDARDIZE_MATRIX],
        help="per pathway row or whole matrix (default: row)",
    )

    eff = p.add_argument_group("effects")
    eff.add_argument("--ordinary-t", action="store_const", const=True, help="no variance shrinkage (prior df 0)")
    eff.add_argument("--design-df", action="store_const", const=True, help="t to d with n_e + n_c - 2 df")

    meta = p.add_argument_group("meta-analysis")
    meta.add_argument("--model", choices=[MODEL_FEM, MODEL_REM], help=f"combination model (default: {DEFAULT_MODEL})")
    meta.add_argument("--alpha", type=float, help=f"fdr level for the significant column (default: {DEFAULT_ALPHA})")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    pipeline = _pipeline_parser()
    parser = argparse.ArgumentParser(prog="gsema", description="pathway-level gene expression meta-analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common, pipeline], help="full pipeline from expression matrices")
    run.add_argument("--manifest", help="study manifest TSV")
    run.add_argument("--gmt", help="gene set catalog")
    run.add_argument("--out", dest="output_dir", help="output directory (default: gsema_out)")
    run.add_argument("--scores-out", metavar="DIR", help="also write every study's score matrix here")

    score = sub.add_parser("score", parents=[common, pipeline], help="pathway score matrices only")
    score.add_argument("--manifest", help="study manifest TSV")
    score.add_argument("--expression", help="single expression TSV instead of a manifest")
    score.add_argument("--gmt", help="gene set catalog")
    score.add_argument("--out", dest="output_dir", help="output directory (default: gsema_out)")

    meta = sub.add_parser("meta", parents=[common, pipeline], help="meta-analysis of score matrices written by score")
    meta.add_argument("--manifest", help="score manifest written by score; its method column sets --sse")
    meta.add_argument("--out", dest="output_dir", help="output directory (default: gsema_out)")

    sim = sub.add_parser("simulate", parents=[common], help="synthetic studies with a spiked pathway")
    sim.add_argument("--out", dest="output_dir", required=True, help="directory for the simulated files")
    sim.add_argument("--studies", dest="k_studies", type=int, help="number of studies (default: 5)")
    sim.add_argument("--genes", type=int, help="genes per study (default: 2000)")
    sim.add_argument("--n-case", dest="n_e", type=int, help="case samples per study (default: 20)")
    sim.add_argument("--n-control", dest="n_c", type=int, help="control samples per study (default: 20)")
    sim.add_argument("--de-fraction", type=float, help="share of DE genes (default: 0.01)")
    sim.add_argument("--spiked-size", dest="spiked_set_size", type=int, help="spiked pathway size (default: 23)")
    sim.add_argument("--decoys", dest="n_decoy_sets", type=int, help="number of decoy sets (default: 500)")
    sim.add_argument("--dispersion", dest="nb_dispersion", type=float, help="negative binomial dispersion (default: 0.2)")
    sim.add_argument("--decoy-overlap", dest="decoy_overlap_de", action="store_const", const=True, help="decoys may use DE genes")

    perm = sub.add_parser("permute", parents=[common, pipeline], help="label permutation suite")
    perm.add_argument("--manifest", help="study manifest TSV")
    perm.add_argument("--gmt", help="gene set catalog")
    perm.add_argument("--out", dest="output_dir", help="output directory (default: gsema_out)")
    perm.add_argument(
        "--iterations",
        type=int,
        default=DEFAULT_ITERATIONS,
        help=f"label shuffles (default: {DEFAULT_ITERATIONS})",
    )
    perm.add_argument(
        "--p-threshold",
        type=float,
        default=DEFAULT_ALPHA,
        help=f"raw p-value cut for counting (default: {DEFAULT_ALPHA})",
    )
    return parser


def _settings(args: argparse.Namespace) -> dict[str, dict[str, Any]]:
    get = lambda name: getattr(args, name, None)  # noqa: E731
    return {
        "sse": {
            "method": get("sse"),
            "min_set_size": get("min_set_size"),
            "max_set_size": get("max_set_size"),
            "ssgsea_weight_exponent": get("ssgsea_weight"),
            "ssgsea_normalize": get("ssgsea_normalize"),
            "gsva_kernel": get("gsva_kernel"),
            "gsva_max_diff": get("gsva_max_diff"),
            "singscore_directed": get("singscore_directed"),
        },
        "filter": {
            "activity_threshold": get("filter_threshold"),
            "min_studies": get("min_studies"),
            "standardize": get("standardize"),
            "standardize_mode": get("standardize_mode"),
        },
        "effects": {"ordinary_t": get("ordinary_t"), "design_df": get("design_df")},
        "meta": {"model": get("model"), "alpha": get("alpha")},
        "run": {
            "seed": get("seed"),
            "threads": get("threads"),
            "manifest": get("manifest"),
            "gmt": get("gmt"),
            "output_dir": get("output_dir"),
            "scores_out": get("scores_out"),
        },
    }


def _setup_logging(args: argparse.Namespace) -> None:
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s", force=True)


def _require(value: Path | None, flag: str) -> Path:
    if value is None:
        raise ConfigError(f"{flag} is required")
    return value


def _load_inputs(cfg: RunConfig):
    manifest_path = _require(cfg.manifest, "--manifest")
    gmt_path = _require(cfg.gmt, "--gmt")
    manifest, studies = load_manifest(manifest_path, gmt_path, cfg.config_path, threads=cfg.threads)
    return manifest, studies, parse_gmt(gmt_path)


def _write_analysis(cfg: RunConfig, result: AnalysisResult) -> list[Path]:
    out = cfg.output_dir
    outputs = [
        write_results_tsv(result.results, out / RESULTS_FILE),
        write_effects_tsv([e for effects in result.effects.values() for e in effects], out / EFFECTS_FILE),
        write_tsv(result.filter_table, out / FILTER_REPORT_FILE),
    ]
    if cfg.scores_out is not None:
        for scores in result.scores:
            outputs.append(write_scores_tsv(scores, cfg.scores_out / f"{scores.study_id}_scores.tsv"))
    return outputs


def cmd_run(cfg: RunConfig) -> int:
    _, studies, sets = _load_inputs(cfg)
    coordinator = GsemaCoordinator(cfg.pipeline, threads=cfg.threads)
    result = coordinator.run(studies, sets)
    outputs = _write_analysis(cfg, result)
    write_run_metadata(
        cfg.output_dir / RUN_METADATA_FILE,
        config=cfg.as_dict(),
        seed=cfg.seed,
        timings=coordinator.timings,
        outputs=outputs,
        extra={"studies": [s.study_id for s in studies], "pathways_tested": len(result.results)},
    )
    top = result.results[0]
    logger.info("top pathway %s (ces %.4g, fdr %.3g)", top.pathway, top.ces, top.fdr)
    return EXIT_OK


def cmd_score(cfg: RunConfig, expression: str | None = None) -> int:
    gmt_path = _require(cfg.gmt, "--gmt")
    coordinator = GsemaCoordinator(cfg.pipeline, threads=cfg.threads)
    out = cfg.output_dir
    if expression is not None:
        matrix = parse_expression_tsv(expression, study_id=Path(expression).stem)
        scores = coordinator.score([matrix], parse_gmt(gmt_path))
        write_scores_tsv(scores[0], out / f"{scores[0].study_id}_scores.tsv")
        return EXIT_OK

    manifest, studies, sets = _load_inputs(cfg)
    scores = coordinator.score(studies, sets)
    entries = []
    for entry, matrix in zip(manifest.entries, scores):
        path = write_scores_tsv(matrix, out / f"{matrix.study_id}_scores.tsv")
        entries.append(ManifestEntry(entry.study_id, path, entry.labels_path, method=matrix.method))
    write_manifest(entries, out / MANIFEST_FILE)
    logger.info("wrote %d score matrices to %s", len(entries), out)
    return EXIT_OK


def cmd_meta(cfg: RunConfig, requested_method: str | None = None) -> int:
    manifest_path = _require(cfg.manifest, "--manifest")
    scores, labels = load_score_manifest(manifest_path, requested_method, threads=cfg.threads)
    sse = replace(cfg.pipeline.sse, method=scores[0].method)
    cfg = replace(cfg, pipeline=replace(cfg.pipeline, sse=sse))
    coordinator = GsemaCoordinator(cfg.pipeline, threads=cfg.threads)
    result = coordinator.analyze(coordinator.standardize(scores), labels)
    outputs = _write_analysis(cfg, result)
    write_run_metadata(
        cfg.output_dir / RUN_METADATA_FILE,
        config=cfg.as_dict(),
        seed=cfg.seed,
        timings=coordinator.timings,
        outputs=outputs,
    )
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, args: argparse.Namespace) -> int:
    fields = ("k_studies", "genes", "n_e", "n_c", "de_fraction", "spiked_set_size", "n_decoy_sets", "nb_dispersion", "decoy_overlap_de")
    overrides = {f: getattr(args, f) for f in fields if getattr(args, f) is not None}
    sim = simulate_studies(SimConfig(seed=cfg.seed, **overrides))
    manifest = write_simulation(sim, cfg.output_dir)
    print(manifest)
    return EXIT_OK


def cmd_permute(cfg: RunConfig, iterations: int, p_threshold: float, progress: bool) -> int:
    _, studies, sets = _load_inputs(cfg)
    report = run_permutation_suite(
        studies,
        sets,
        cfg.pipeline,
        iterations=iterations,
        seed=cfg.seed,
        threads=cfg.threads,
        p_threshold=p_threshold,
        progress=progress,
    )
    write_tsv(report.to_frame(), cfg.output_dir / PERMUTATION_FILE)
    save_json({**report.summary(), "config": cfg.as_dict()}, cfg.output_dir / PERMUTATION_SUMMARY_FILE)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args)
    try:
        cfg = build_run_config(_settings(args), args.config)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "score":
            return cmd_score(cfg, args.expression)
        if args.command == "meta":
            return cmd_meta(cfg, args.sse)
        if args.command == "simulate":
            return cmd_simulate(cfg, args)
        return cmd_permute(cfg, args.iterations, args.p_threshold, progress=not args.quiet)
    except GsemaError as e:
        logger.error("%s", e)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
