"""
Command-line entry point: dataset generation, pipeline runs, evaluation and reports.

Exit codes: 0 success, 1 the command finished but recorded stage errors or
report mismatches, 2 a hard error stopped the command.
"""
import argparse
import asyncio
import json
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from loguru import logger

from backend.agents.pipeline_agent import STAGE_DEPTH, PipelineAgent, load_run
from backend.config.settings import (
    ENV_PREFIX,
    get_settings_summary,
    load_environment,
    load_generation_config,
    load_pipeline_settings,
)
from backend.database.database import dispose_engines
from backend.dataset import (
    clean_scenes,
    filter_instances,
    filter_scenes,
    generate,
    ingest_voc,
    load_manifest,
    summarize_manifest,
    write_manifest,
    write_synthetic_voc,
)
from backend.evaluation import aggregate, render_csv, render_markdown, results_frame, verify_report, write_report
from backend.exceptions import ConfigError, PoemError
from backend.services.registry import BackendSet

EXIT_OK = 0
EXIT_RECORDED_ERRORS = 1
EXIT_HARD_ERROR = 2


def configure_logging(level: Optional[str] = None):
    level = (level or os.getenv(f"{ENV_PREFIX}LOG_LEVEL") or "INFO").upper()
    logger.remove()
    logger.add(sys.stderr, level=level)


def _print_json(data):
    print(json.dumps(data, indent=2, sort_keys=True, default=str))


def cmd_gen_dataset(args) -> int:
    cfg = load_generation_config(args.config, seed=args.seed)
    instances = ingest_voc(args.voc_dir)
    filtered = filter_instances(instances, cfg)
    samples = generate(filtered.kept, cfg, annotations=instances)
    path = write_manifest(samples, args.out, cfg)
    _print_json(
        {
            "manifest": str(path),
            "config_hash": cfg.config_hash(),
            "instances": len(instances),
            "kept": len(filtered.kept),
            "dropped": filtered.tallies,
            "summary": summarize_manifest(samples),
        }
    )
    return EXIT_OK


def cmd_run_pipeline(args) -> int:
    settings = load_pipeline_settings(args.backends)
    logger.info(f"Backend settings: {get_settings_summary(settings)}")
    manifest = load_manifest(args.manifest)
    if args.limit:
        manifest = replace(manifest, samples=manifest.samples[: args.limit])
    agent = PipelineAgent(BackendSet(settings), args.out, stage=args.stage, max_concurrency=args.max_concurrency)
    summary = asyncio.run(agent.run(manifest))
    _print_json(summary.model_dump(mode="json"))
    return EXIT_RECORDED_ERRORS if summary.errors else EXIT_OK


def _report_inputs(args):
    meta, results = load_run(args.results, args.run_id)
    manifest_path = args.manifest or meta["manifest_path"]
    if not manifest_path:
        raise ConfigError("the run does not record its manifest; pass --manifest")
    manifest = load_manifest(manifest_path)
    report = aggregate(
        results,
        manifest,
        label=meta["label"],
        config_hash=meta["config_hash"],
        template_versions=meta["template_versions"],
        seed=meta["seed"],
    )
    return meta, results, manifest, report


def cmd_eval(args) -> int:
    meta, results, manifest, report = _report_inputs(args)
    out_dir = Path(args.out or args.results)
    if out_dir.suffix == ".db":
        out_dir = out_dir.parent
    per_sample = results_frame(results, manifest, label=meta["label"])
    paths = write_report(report, out_dir, per_sample)
    problems = verify_report(report, paths["per_sample"])
    for problem in problems:
        logger.error(f"Report mismatch: {problem}")
    _print_json({**{name: str(p) for name, p in paths.items()}, "mismatches": problems})
    return EXIT_RECORDED_ERRORS if problems else EXIT_OK


def cmd_report(args) -> int:
    _, _, _, report = _report_inputs(args)
    sys.stdout.write(render_markdown(report) if args.format == "md" else render_csv(report))
    return EXIT_OK


def cmd_make_fixture(args) -> int:
    if args.kind == "filters":
        scenes = filter_scenes()
    else:
        scenes = clean_scenes(args.images, shape=args.shape)
    root = write_synthetic_voc(args.out, scenes)
    _print_json({"root": str(root), "images": len(scenes), "instances": sum(len(s.objects) for s in scenes)})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="poem", description="Instruction-driven object edit benchmark toolkit")
    parser.add_argument("--log-level", default=None, help=f"loguru level (default: ${ENV_PREFIX}LOG_LEVEL or INFO)")
    parser.add_argument("--env-file", default=None, help="dotenv file loaded before configs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-dataset", help="build a benchmark manifest from a VOC-layout directory")
    p.add_argument("--voc-dir", required=True, type=Path)
    p.add_argument("--config", type=Path, default=None, help="TOML with a [generation] table")
    p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(handler=cmd_gen_dataset)

    p = sub.add_parser("run-pipeline", help="run the staged pipeline over a manifest")
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--backends", type=Path, default=None, help="TOML backend config (default: all oracles)")
    p.add_argument("--stage", choices=sorted(STAGE_DEPTH), default="all")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--max-concurrency", type=int, default=4)
    p.add_argument("--limit", type=int, default=None, help="only the first N samples")
    p.set_defaults(handler=cmd_run_pipeline)

    for name, handler, text in (
        ("eval", cmd_eval, "score a run: per-sample CSV, Markdown and CSV reports, verification"),
        ("report", cmd_report, "print the report of a run"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--results", required=True, type=Path, help="run directory or results.db")
        p.add_argument("--manifest", type=Path, default=None, help="defaults to the manifest recorded with the run")
        p.add_argument("--run-id", type=int, default=None, help="defaults to the latest run")
        if name == "eval":
            p.add_argument("--out", type=Path, default=None, help="defaults to the run directory")
        else:
            p.add_argument("--format", choices=("md", "csv"), default="md")
        p.set_defaults(handler=handler)

    p = sub.add_parser("make-fixture", help="write a synthetic VOC-layout fixture")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--images", type=int, default=4)
    p.add_argument("--kind", choices=("clean", "filters"), default="clean")
    p.add_argument("--shape", choices=("rect", "ellipse"), default="rect")
    p.set_defaults(handler=cmd_make_fixture)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    load_environment(args.env_file)
    configure_logging(args.log_level)
    try:
        return args.handler(args)
    except PoemError as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_HARD_ERROR
    except OSError as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_HARD_ERROR
    finally:
        dispose_engines()


if __name__ == "__main__":
    sys.exit(main())
