"""Evaluation metrics over repair trajectories.

pass@k uses the unbiased estimator over n samples with c successes,

    pass@k = 1 - C(n-c, k) / C(n, k),

evaluated in the numerically stable product form
``1 - prod_{i=n-c+1..n} (1 - k/i)`` so large n never overflows.
"""

from __future__ import annotations

import csv
import io
import json
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .corpus import CodeErrorSet, ErrorType
from .repair import Trajectory


def pass_at_k(n: int, c: int, k: int) -> float:
    """Probability that at least one of k draws from n samples is correct.

    Requires ``0 <= c <= n`` and ``1 <= k <= n``.  Returns exactly 1.0 when
    fewer than k incorrect samples exist (c >= n - k + 1).
    """
    if not 0 <= c <= n:
        raise ValueError(f"need 0 <= c <= n, got c={c}, n={n}")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if n - c < k:
        return 1.0
    miss = 1.0
    for i in range(n - c + 1, n + 1):
        miss *= 1.0 - k / i
    return 1.0 - miss


@dataclass(frozen=True)
class EvalReport:
    """Aggregated evaluation results for one batch of trajectories."""

    pass_at: dict[int, float]
    repaired_by_type: dict[ErrorType, tuple[int, int]]
    per_turn_pass: tuple[float, ...]
    total_model_calls: int
    trajectories: int = 0

    def to_dict(self) -> dict:
        return {
            "pass_at": {str(k): v for k, v in sorted(self.pass_at.items())},
            "repaired_by_type": {
                t.value: {"repaired": r, "total": n}
                for t, (r, n) in sorted(self.repaired_by_type.items(), key=lambda kv: kv[0].value)
            },
            "per_turn_pass": list(self.per_turn_pass),
            "total_model_calls": self.total_model_calls,
            "trajectories": self.trajectories,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EvalReport":
        return cls(
            pass_at={int(k): float(v) for k, v in data["pass_at"].items()},
            repaired_by_type={
                ErrorType(t): (int(v["repaired"]), int(v["total"]))
                for t, v in data["repaired_by_type"].items()
            },
            per_turn_pass=tuple(data["per_turn_pass"]),
            total_model_calls=int(data["total_model_calls"]),
            trajectories=int(data.get("trajectories", 0)),
        )


def aggregate(trajectories: Sequence[Trajectory],
              entries: CodeErrorSet | None = None,
              ks: Iterable[int] = (1,)) -> EvalReport:
    """Aggregate trajectories into pass@k, per-type repair rates, and curves.

    pass@k groups trajectories by task_id, so several samples of the same
    task form one (n, c) pair; with n = 1 everywhere, pass@1 is the plain
    pass fraction.  ``per_turn_pass[t]`` is the fraction of trajectories
    that passed using at most t repair turns.  When ``entries`` is given,
    repairs are also grouped by each entry's original error type; the
    trajectory and entry id sets must then match exactly.
    """
    trajectories = list(trajectories)
    if not trajectories:
        raise ValueError("no trajectories to aggregate")

    by_task: dict[str, list[Trajectory]] = defaultdict(list)
    for t in trajectories:
        by_task[t.task_id].append(t)

    pass_at: dict[int, float] = {}
    for k in ks:
        estimates = []
        for task_id, group in by_task.items():
            n = len(group)
            c = sum(1 for t in group if t.passed)
            estimates.append(pass_at_k(n, c, k))
        pass_at[k] = sum(estimates) / len(estimates)

    max_turn = max(t.repair_turns for t in trajectories)
    per_turn = tuple(
        sum(1 for t in trajectories if t.passed and t.repair_turns <= turn) / len(trajectories)
        for turn in range(max_turn + 1)
    )

    repaired_by_type: dict[ErrorType, tuple[int, int]] = {}
    if entries is not None:
        entry_ids = {e.task_id for e in entries}
        run_ids = set(by_task)
        orphans = sorted(entry_ids ^ run_ids)
        if orphans:
            raise ValueError(f"task_ids present on only one side: {', '.join(orphans)}")
        counts: dict[ErrorType, list[int]] = defaultdict(lambda: [0, 0])
        for entry in entries:
            repaired = any(t.passed for t in by_task[entry.task_id])
            counts[entry.error.error_type][0] += int(repaired)
            counts[entry.error.error_type][1] += 1
        repaired_by_type = {t: (r, n) for t, (r, n) in counts.items()}

    return EvalReport(
        pass_at=pass_at,
        repaired_by_type=repaired_by_type,
        per_turn_pass=per_turn,
        total_model_calls=sum(t.model_calls for t in trajectories),
        trajectories=len(trajectories),
    )


class ReportFormat(str, Enum):
    PLAIN_TABLE = "txt"
    JSON = "json"
    CSV = "csv"


def render_report(report: EvalReport, format: ReportFormat = ReportFormat.PLAIN_TABLE) -> str:
    format = ReportFormat(format)
    if format is ReportFormat.JSON:
        return json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n"
    if format is ReportFormat.CSV:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["error_type", "repaired", "total"])
        for error_type, (repaired, total) in sorted(
            report.repaired_by_type.items(), key=lambda kv: kv[0].value
        ):
            writer.writerow([error_type.value, repaired, total])
        return buf.getvalue()
    return _render_text(report)


def _render_text(report: EvalReport) -> str:
    lines = [f"trajectories: {report.trajectories}"]
    for k, value in sorted(report.pass_at.items()):
        lines.append(f"pass@{k}: {value:.4f}")
    lines.append(f"total model calls: {report.total_model_calls}")
    lines.append("")
    lines.append("pass fraction by repair turn budget:")
    for turn, value in enumerate(report.per_turn_pass):
        lines.append(f"  <= {turn} turns: {value:.4f}")
    if report.repaired_by_type:
        lines.append("")
        lines.append("repaired by original error type:")
        width = max(len(t.value) for t in report.repaired_by_type)
        for error_type, (repaired, total) in sorted(
            report.repaired_by_type.items(), key=lambda kv: kv[0].value
        ):
            lines.append(f"  {error_type.value:<{width}}  {repaired}/{total}")
    return "\n".join(lines) + "\n"


def write_reports(report: EvalReport, out_dir) -> None:
    """Emit report.json, report.csv, and report.txt into the output directory."""
    from pathlib import Path

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(render_report(report, ReportFormat.JSON),
                                         encoding="utf-8")
    (out_dir / "report.csv").write_text(render_report(report, ReportFormat.CSV),
                                        encoding="utf-8")
    (out_dir / "report.txt").write_text(render_report(report, ReportFormat.PLAIN_TABLE),
                                        encoding="utf-8")
