"""Command-line entry point.

Subcommands: generate, repair, eval, build, stats.  Exit codes are a stable
contract: 0 success, 1 partial per-item failures, 2 configuration or usage
errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import builder, metrics
from .agents import PromptMode
from .config import ConfigError, EngineConfig, load_engine_config
from .corpus import (
    CodeErrorSet,
    SchemaError,
    TaskFormat,
    TaskSet,
    load_code_error,
    load_tasks,
    write_code_error,
)
from .repair import RepairMode, load_trajectory_dir, run_batch

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_USAGE = 2

GENERATION_MODES = {
    "zero-shot": PromptMode.ZERO_SHOT,
    "zero-shot-cot": PromptMode.ZERO_SHOT_COT,
    "few-shot": PromptMode.FEW_SHOT,
    "few-shot-cot": PromptMode.FEW_SHOT_COT,
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="engine config JSON")
    parser.add_argument("--out", type=Path, default=None, help="output directory")
    parser.add_argument("--parallelism", type=int, default=None)
    parser.add_argument("--resume", action="store_true",
                        help="skip items with a completed trajectory file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="repairloop")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="initial generation only (no repair turns)")
    _add_common(p_gen)
    p_gen.add_argument("--tasks", type=Path, required=True)
    p_gen.add_argument("--format", choices=[f.value for f in TaskFormat], default="generic")
    p_gen.add_argument("--mode", choices=sorted(GENERATION_MODES), default=None,
                       help="generation prompting mode")
    p_gen.add_argument("--eval-slice", action="store_true",
                       help="keep only the MBPP evaluation id range")

    p_rep = sub.add_parser("repair", help="full interactive repair loop")
    _add_common(p_rep)
    p_rep.add_argument("--input", type=Path, required=True,
                       help="generation tasks or repair-benchmark JSONL")
    p_rep.add_argument("--format",
                       choices=["codeerror"] + [f.value for f in TaskFormat],
                       default="codeerror")
    p_rep.add_argument("--mode", choices=[m.value for m in RepairMode], default=None)
    p_rep.add_argument("--max-turns", type=int, default=None)
    p_rep.add_argument("--eval-slice", action="store_true")

    p_eval = sub.add_parser("eval", help="aggregate trajectories into reports")
    p_eval.add_argument("--trajectories", type=Path, required=True,
                        help="directory of trajectory JSON files")
    p_eval.add_argument("--entries", type=Path, default=None,
                        help="repair benchmark the trajectories came from")
    p_eval.add_argument("--out", type=Path, default=None)

    p_build = sub.add_parser("build", help="build a repair benchmark from candidates")
    p_build.add_argument("--config", type=Path, default=None)
    p_build.add_argument("--tasks", type=Path, required=True)
    p_build.add_argument("--format", choices=[f.value for f in TaskFormat], default="generic")
    p_build.add_argument("--candidates", type=Path, required=True,
                         help='JSONL of {"task_id", "code"} records')
    p_build.add_argument("--out", type=Path, default=None)
    p_build.add_argument("--eval-slice", action="store_true")

    p_stats = sub.add_parser("stats", help="statistics table for a repair benchmark")
    p_stats.add_argument("--input", type=Path, required=True)
    p_stats.add_argument("--out", type=Path, default=None)

    for sub_parser in (p_gen, p_rep, p_eval, p_build, p_stats):
        # SUPPRESS so a subcommand-position flag augments rather than clobbers
        # a -v given before the subcommand.
        sub_parser.add_argument("-v", "--verbose", action="store_true",
                                default=argparse.SUPPRESS)

    return parser


def _load_items(path: Path, fmt: str, eval_slice: bool) -> TaskSet | CodeErrorSet:
    if fmt == "codeerror":
        return load_code_error(path)
    return load_tasks(path, TaskFormat(fmt), eval_slice=eval_slice)


def _out_dir(args, config: EngineConfig) -> Path:
    return args.out if args.out is not None else config.output_dir


def _finish_batch(trajectories, entries, out_dir: Path) -> int:
    if trajectories:
        report = metrics.aggregate(trajectories, entries)
        metrics.write_reports(report, out_dir)
        print(metrics.render_report(report), end="")
    failures = [t for t in trajectories if t.abort_reason]
    if failures:
        log.warning("%d item(s) aborted; first: %s (%s)", len(failures),
                    failures[0].task_id, failures[0].abort_reason)
        return EXIT_PARTIAL
    return EXIT_OK


def _cmd_generate(args) -> int:
    config = load_engine_config(args.config)
    generation_mode = GENERATION_MODES[args.mode] if args.mode else None
    repair_config = config.repair_config(
        max_turns=0, include_generation=True, generation_mode=generation_mode,
    )
    tasks = _load_items(args.tasks, args.format, args.eval_slice)
    out_dir = _out_dir(args, config)
    trajectories = run_batch(
        tasks, repair_config,
        parallelism=args.parallelism or config.parallelism,
        out_dir=out_dir, resume=args.resume,
    )
    return _finish_batch(trajectories, None, out_dir)


def _cmd_repair(args) -> int:
    config = load_engine_config(args.config)
    items = _load_items(args.input, args.format, getattr(args, "eval_slice", False))
    from_entries = isinstance(items, CodeErrorSet)
    repair_config = config.repair_config(
        mode=RepairMode(args.mode) if args.mode else None,
        max_turns=args.max_turns,
        include_generation=not from_entries,
    )
    out_dir = _out_dir(args, config)
    trajectories = run_batch(
        items, repair_config,
        parallelism=args.parallelism or config.parallelism,
        out_dir=out_dir, resume=args.resume,
    )
    return _finish_batch(trajectories, items if from_entries else None, out_dir)


def _cmd_eval(args) -> int:
    if not args.trajectories.is_dir():
        raise ConfigError(f"trajectory directory not found: {args.trajectories}")
    trajectories = load_trajectory_dir(args.trajectories)
    if not trajectories:
        raise ConfigError(f"no trajectory files under {args.trajectories}")
    entries = load_code_error(args.entries) if args.entries else None
    report = metrics.aggregate(trajectories, entries)
    out_dir = args.out if args.out is not None else args.trajectories.parent
    metrics.write_reports(report, out_dir)
    print(metrics.render_report(report), end="")
    return EXIT_OK


def _cmd_build(args) -> int:
    config = load_engine_config(args.config)
    tasks = _load_items(args.tasks, args.format, args.eval_slice)
    candidates: dict[str, str] = {}
    with args.candidates.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            record = json.loads(line)
            if "task_id" not in record or "code" not in record:
                raise SchemaError("candidate record needs task_id and code", line=line_no)
            candidates[str(record["task_id"])] = str(record["code"])

    try:
        outcome = builder.build_code_error_detailed(
            tasks, candidates, config.limits, config.runner,
        )
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from exc

    out_dir = args.out if args.out is not None else config.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    write_code_error(outcome.entries, out_dir / "codeerror.jsonl")
    if len(outcome.entries):
        table = builder.stats(outcome.entries)
        (out_dir / "stats.csv").write_text(builder.render_stats_csv(table), encoding="utf-8")
        print(builder.render_stats_text(table), end="")
    else:
        log.warning("no failing candidates; benchmark is empty")
    print(f"entries: {len(outcome.entries)}  passed: {len(outcome.passed_ids)}  "
          f"runner errors: {len(outcome.runner_error_ids)}")
    return EXIT_OK


def _cmd_stats(args) -> int:
    entries = load_code_error(args.input)
    if not len(entries):
        raise ConfigError(f"empty benchmark: {args.input}")
    table = builder.stats(entries)
    print(builder.render_stats_text(table), end="")
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "stats.csv").write_text(builder.render_stats_csv(table), encoding="utf-8")
    return EXIT_OK


_COMMANDS = {
    "generate": _cmd_generate,
    "repair": _cmd_repair,
    "eval": _cmd_eval,
    "build": _cmd_build,
    "stats": _cmd_stats,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, SchemaError, FileNotFoundError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except KeyboardInterrupt:
        log.error("interrupted; partial outputs were flushed")
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
