"""Build repair benchmarks from failing candidate generations, plus stats.

A candidate that fails or times out on its task's suite becomes one repair
entry carrying the classified diagnostic; passing candidates are dropped and
runner-level faults are excluded with a warning (environment problem, not a
code bug).  Conservation always holds:

    entries + passed + runner_errors == candidates
"""

from __future__ import annotations

import csv
import io
import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping

from .corpus import (
    CodeErrorEntry,
    CodeErrorSet,
    ErrorType,
    Provenance,
    TaskCategory,
    TaskSet,
)
from .sandbox import ExecLimits, RunnerConfig, Verdict, run_candidate

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BuildOutcome:
    entries: CodeErrorSet
    passed_ids: tuple[str, ...]
    runner_error_ids: tuple[str, ...]


def build_code_error_detailed(tasks: TaskSet, candidates: Mapping[str, str],
                              limits: ExecLimits | None = None,
                              runner: RunnerConfig | None = None) -> BuildOutcome:
    """Execute candidates and keep the failing ones as repair entries."""
    limits = limits or ExecLimits()
    runner = runner or RunnerConfig()

    unknown = sorted(task_id for task_id in candidates if not _has_task(tasks, task_id))
    if unknown:
        raise KeyError(f"candidates reference unknown task_id(s): {', '.join(unknown)}")

    entries: list[CodeErrorEntry] = []
    passed: list[str] = []
    runner_errors: list[str] = []
    for task_id in sorted(candidates):
        task = tasks.by_id(task_id)
        code = candidates[task_id]
        report = run_candidate(code, task.tests, limits, runner)
        if report.verdict is Verdict.PASSED:
            passed.append(task_id)
        elif report.verdict is Verdict.RUNNER_ERROR:
            log.warning("excluding %s: runner error (%s)", task_id,
                        report.error.description if report.error else "unknown")
            runner_errors.append(task_id)
        else:
            assert report.error is not None
            entries.append(CodeErrorEntry(
                task=task,
                buggy_code=code,
                error=report.error,
                provenance=Provenance.MODEL_GENERATED,
            ))
    return BuildOutcome(
        entries=CodeErrorSet(tuple(entries)),
        passed_ids=tuple(passed),
        runner_error_ids=tuple(runner_errors),
    )


def build_code_error(tasks: TaskSet, candidates: Mapping[str, str],
                     limits: ExecLimits | None = None,
                     runner: RunnerConfig | None = None) -> CodeErrorSet:
    return build_code_error_detailed(tasks, candidates, limits, runner).entries


def _has_task(tasks: TaskSet, task_id: str) -> bool:
    try:
        tasks.by_id(task_id)
        return True
    except KeyError:
        return False


# Error types that get their own row in the stats table; everything else
# (AttributeError, RecursionError, Timeout, Other) folds into "Other Errors".
NAMED_STAT_TYPES = (
    ErrorType.ASSERTION_ERROR,
    ErrorType.NAME_ERROR,
    ErrorType.TYPE_ERROR,
    ErrorType.INDEX_ERROR,
    ErrorType.VALUE_ERROR,
    ErrorType.SYNTAX_ERROR,
)

OTHER_ERRORS_LABEL = "Other Errors"


@dataclass(frozen=True)
class CategoryStats:
    problems: int
    error_counts: dict[str, int]
    avg_problem_words: float
    avg_buggy_lines: float
    avg_test_cases: float


@dataclass(frozen=True)
class BenchmarkStats:
    per_category: dict[TaskCategory, CategoryStats]
    total: CategoryStats


def _non_blank_lines(code: str) -> int:
    return sum(1 for line in code.splitlines() if line.strip())


def _category_stats(entries: list[CodeErrorEntry]) -> CategoryStats:
    counts = {t.value: 0 for t in NAMED_STAT_TYPES}
    counts[OTHER_ERRORS_LABEL] = 0
    for entry in entries:
        error_type = entry.error.error_type
        if error_type in NAMED_STAT_TYPES:
            counts[error_type.value] += 1
        else:
            counts[OTHER_ERRORS_LABEL] += 1
    n = len(entries)
    return CategoryStats(
        problems=n,
        error_counts=counts,
        avg_problem_words=sum(len(e.task.description.split()) for e in entries) / n,
        avg_buggy_lines=sum(_non_blank_lines(e.buggy_code) for e in entries) / n,
        avg_test_cases=sum(len(e.task.tests) for e in entries) / n,
    )


def stats(entry_set: CodeErrorSet) -> BenchmarkStats:
    """Per-category benchmark statistics.

    Word counts split on whitespace; buggy-code length counts non-blank
    lines.  Counts are exact integers; rounding happens only at render time.
    """
    if not len(entry_set):
        raise ValueError("stats over an empty benchmark")
    grouped: dict[TaskCategory, list[CodeErrorEntry]] = defaultdict(list)
    for entry in entry_set:
        grouped[entry.task.category].append(entry)
    per_category = {
        category: _category_stats(entries)
        for category, entries in grouped.items()
    }
    return BenchmarkStats(per_category=per_category, total=_category_stats(list(entry_set)))


_STAT_ROWS = [t.value for t in NAMED_STAT_TYPES] + [OTHER_ERRORS_LABEL]


def render_stats_csv(benchmark_stats: BenchmarkStats) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    categories = [c for c in TaskCategory if c in benchmark_stats.per_category]
    writer.writerow([""] + [c.value for c in categories] + ["total"])
    columns = [benchmark_stats.per_category[c] for c in categories] + [benchmark_stats.total]
    writer.writerow(["Problem"] + [s.problems for s in columns])
    for row in _STAT_ROWS:
        writer.writerow([row] + [s.error_counts[row] for s in columns])
    writer.writerow(["Avg. Problem Words"] + [round(s.avg_problem_words, 1) for s in columns])
    writer.writerow(["Avg. Buggy Code"] + [round(s.avg_buggy_lines, 1) for s in columns])
    writer.writerow(["Avg. Test Cases"] + [round(s.avg_test_cases, 1) for s in columns])
    return buf.getvalue()


def render_stats_text(benchmark_stats: BenchmarkStats) -> str:
    rows = render_stats_csv(benchmark_stats).strip().splitlines()
    table = [line.split(",") for line in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(table[0]))]
    lines = []
    for row in table:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
    return "\n".join(lines) + "\n"
