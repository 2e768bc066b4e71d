"""The interactive repair loop and its batch driver.

An episode optionally generates initial code, executes it, and then cycles
execute -> diagnose -> repair until the suite passes or the turn budget runs
out.  The diagnose step depends on the configured mode: the two-agent mode
asks the teacher for repair instructions built from compiler feedback; the
baselines self-critique, inject the raw error message, or just re-prompt.
Every turn is grounded in a real execution, and the final verdict always
comes from the last execution, never from model self-report.

Call budget per repair turn: two-agent and self-refine modes spend 2 model
calls, all single-prompt modes spend 1; initial generation adds 1.  The
budget is asserted on every completed trajectory.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import logging
import re
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Mapping

from .agents import (
    ChatModel,
    ChatModelConfig,
    CoRText,
    PromptMode,
    PromptTemplate,
    TransportError,
    build_model,
    extract_code,
    load_exemplars,
    load_templates,
    render_prompt,
    split_cor,
    teacher_cor,
)
from .corpus import CodeErrorEntry, CodeErrorSet, ErrorMessage, ErrorType, Task, TaskSet
from .sandbox import (
    ExecLimits,
    ExecutionReport,
    RunnerConfig,
    Verdict,
    describe_failure,
    run_candidate,
)

log = logging.getLogger(__name__)


class RepairMode(str, Enum):
    COR = "cor"
    SELF_REFINE = "self-refine"
    ERROR_MSGS = "error-msgs"
    REPAIR_ZERO_SHOT = "repair-zero-shot"
    REPAIR_FEW_SHOT = "repair-few-shot"
    REPAIR_COT = "repair-cot"


# Model calls consumed by one repair turn, per mode.
CALLS_PER_REPAIR_TURN = {
    RepairMode.COR: 2,
    RepairMode.SELF_REFINE: 2,
    RepairMode.ERROR_MSGS: 1,
    RepairMode.REPAIR_ZERO_SHOT: 1,
    RepairMode.REPAIR_FEW_SHOT: 1,
    RepairMode.REPAIR_COT: 1,
}


GENERATION_PROMPT_MODES = (
    PromptMode.ZERO_SHOT,
    PromptMode.ZERO_SHOT_COT,
    PromptMode.FEW_SHOT,
    PromptMode.FEW_SHOT_COT,
)


class FinalVerdict(str, Enum):
    PASSED = "passed"
    UNRESOLVED = "unresolved"


class AccountingError(AssertionError):
    """A trajectory's call count disagrees with the mode's budget."""


@dataclass
class RepairConfig:
    learner: ChatModelConfig
    teacher: ChatModelConfig | None = None
    max_turns: int = 5
    mode: RepairMode = RepairMode.COR
    include_generation: bool = True
    generation_mode: PromptMode = PromptMode.ZERO_SHOT
    limits: ExecLimits = field(default_factory=ExecLimits)
    runner: RunnerConfig = field(default_factory=RunnerConfig)
    teacher_sees_description: bool = True
    teacher_history: bool = False
    template_dir: Path | None = None

    def __post_init__(self):
        self.mode = RepairMode(self.mode)
        self.generation_mode = PromptMode(self.generation_mode)
        if self.generation_mode not in GENERATION_PROMPT_MODES:
            raise ValueError(f"{self.generation_mode.value} is not a generation mode")
        if self.max_turns < 0:
            raise ValueError("max_turns must be >= 0")
        if self.mode is RepairMode.COR and self.teacher is None:
            raise ValueError("cor mode requires a teacher model")


@dataclass(frozen=True)
class TurnRecord:
    turn_index: int
    code: str
    report: ExecutionReport
    cor: CoRText | None = None
    calls_this_turn: int = 0


@dataclass(frozen=True)
class Trajectory:
    task_id: str
    mode: RepairMode
    turns: tuple[TurnRecord, ...]
    final_verdict: FinalVerdict
    repair_turns: int
    model_calls: int
    wall_time: float
    include_generation: bool
    initial_report: ExecutionReport | None = None
    abort_reason: str | None = None

    @property
    def passed(self) -> bool:
        return self.final_verdict is FinalVerdict.PASSED


Executor = Callable[..., ExecutionReport]


def _generation_messages(task: Task, config: RepairConfig,
                         templates: Mapping[PromptMode, PromptTemplate]) -> list[dict]:
    mode = config.generation_mode
    context: dict[str, str] = {"description": task.description}
    if mode in (PromptMode.FEW_SHOT, PromptMode.FEW_SHOT_COT):
        context["examples"] = load_exemplars("generation", config.template_dir)
    return render_prompt(templates[mode], context)


def _episode_error(entry_or_task, config, reason: str, turns, initial_report,
                   calls: int, started: float) -> Trajectory:
    repair_turns = len(turns) - (1 if config.include_generation and turns else 0)
    return Trajectory(
        task_id=_item_task(entry_or_task).task_id,
        mode=config.mode,
        turns=tuple(turns),
        final_verdict=FinalVerdict.UNRESOLVED,
        repair_turns=max(repair_turns, 0),
        model_calls=calls,
        wall_time=time.monotonic() - started,
        include_generation=config.include_generation,
        initial_report=initial_report,
        abort_reason=reason,
    )


def _item_task(item: Task | CodeErrorEntry) -> Task:
    return item.task if isinstance(item, CodeErrorEntry) else item


def run_episode(item: Task | CodeErrorEntry, config: RepairConfig, *,
                execute: Executor = run_candidate,
                templates: Mapping[PromptMode, PromptTemplate] | None = None) -> Trajectory:
    """Run one repair episode for a generation task or a repair entry.

    Repair entries start from their given buggy code, so
    ``include_generation`` must be off for them.
    """
    if isinstance(item, CodeErrorEntry) and config.include_generation:
        raise ValueError("repair entries start from buggy code; disable include_generation")

    task = _item_task(item)
    templates = templates or load_templates(config.template_dir)
    learner = build_model(config.learner)
    teacher = build_model(config.teacher) if config.teacher is not None else None

    started = time.monotonic()
    turns: list[TurnRecord] = []
    initial_report: ExecutionReport | None = None
    history: list[tuple[str, str]] = []

    def total_calls() -> int:
        return learner.calls + (teacher.calls if teacher else 0)

    try:
        if config.include_generation:
            response = learner.generate(_generation_messages(task, config, templates))
            code = extract_code(response.text, task.language)
            report = execute(code, task.tests, config.limits, config.runner)
            turns.append(TurnRecord(turn_index=0, code=code, report=report,
                                    calls_this_turn=1))
        else:
            code = item.buggy_code  # type: ignore[union-attr]
            report = execute(code, task.tests, config.limits, config.runner)
            initial_report = report

        repair_turns = 0
        while report.verdict is not Verdict.PASSED and repair_turns < config.max_turns:
            if report.verdict is Verdict.RUNNER_ERROR:
                reason = "runner error: " + (report.error.description if report.error else "")
                return _episode_error(item, config, reason, turns, initial_report,
                                      total_calls(), started)

            before = total_calls()
            cor: CoRText | None = None
            if config.mode is RepairMode.COR:
                assert teacher is not None
                cor = _teacher_turn(teacher, task, code, report, templates, config, history)
                context = {"description": task.description, "code": code, "cor": cor.raw}
                messages = render_prompt(templates[PromptMode.LEARNER_APPLY_COR], context)
            elif config.mode is RepairMode.SELF_REFINE:
                plan_messages = render_prompt(
                    templates[PromptMode.SELF_REFINE_PLAN],
                    {"description": task.description, "code": code},
                )
                critique = learner.generate(plan_messages)
                cor = split_cor(critique.text)
                context = {"description": task.description, "code": code, "cor": cor.raw}
                messages = render_prompt(templates[PromptMode.SELF_REFINE_APPLY], context)
            elif config.mode is RepairMode.ERROR_MSGS:
                context = {
                    "description": task.description,
                    "code": code,
                    "error_message": describe_failure(report),
                }
                messages = render_prompt(templates[PromptMode.ERROR_MSGS_REPAIR], context)
            else:
                template_mode = PromptMode(config.mode.value)
                context = {"description": task.description, "code": code}
                if config.mode is RepairMode.REPAIR_FEW_SHOT:
                    context["examples"] = load_exemplars("repair", config.template_dir)
                messages = render_prompt(templates[template_mode], context)

            history.append((code, describe_failure(report)))
            response = learner.generate(messages)
            code = extract_code(response.text, task.language)
            report = execute(code, task.tests, config.limits, config.runner)
            repair_turns += 1
            turns.append(TurnRecord(
                turn_index=len(turns),
                code=code,
                report=report,
                cor=cor,
                calls_this_turn=total_calls() - before,
            ))

    except TransportError as exc:
        return _episode_error(item, config, f"model transport failure: {exc}",
                              turns, initial_report, total_calls(), started)

    final = FinalVerdict.PASSED if report.verdict is Verdict.PASSED else FinalVerdict.UNRESOLVED
    trajectory = Trajectory(
        task_id=task.task_id,
        mode=config.mode,
        turns=tuple(turns),
        final_verdict=final,
        repair_turns=repair_turns,
        model_calls=total_calls(),
        wall_time=time.monotonic() - started,
        include_generation=config.include_generation,
        initial_report=initial_report,
    )
    _check_accounting(trajectory, config)
    return trajectory


def _teacher_turn(teacher: ChatModel, task: Task, code: str, report: ExecutionReport,
                  templates, config: RepairConfig,
                  history: list[tuple[str, str]]) -> CoRText:
    if not config.teacher_history or not history:
        return teacher_cor(teacher, task, code, report, templates,
                           include_description=config.teacher_sees_description)
    # Stateless by default; with history on, earlier attempts are shown as
    # prior conversation turns before the current code + feedback.
    context = {
        "description": task.description if config.teacher_sees_description else "",
        "code": code,
        "error_message": describe_failure(report),
    }
    messages = render_prompt(templates[PromptMode.TEACHER_COR], context)
    prior: list[dict[str, str]] = []
    for old_code, old_error in history:
        prior.append({"role": "user",
                      "content": f"Earlier attempt:\n{old_code}\nFeedback:\n{old_error}"})
    messages = [messages[0], *prior, messages[1]]
    response = teacher.generate(messages)
    return split_cor(response.text)


def _check_accounting(trajectory: Trajectory, config: RepairConfig) -> None:
    expected = (1 if config.include_generation else 0)
    expected += CALLS_PER_REPAIR_TURN[config.mode] * trajectory.repair_turns
    if trajectory.model_calls != expected:
        raise AccountingError(
            f"task {trajectory.task_id}: {trajectory.model_calls} model calls, "
            f"expected {expected} for mode {config.mode.value} "
            f"with {trajectory.repair_turns} repair turns"
        )


# --- persistence ---------------------------------------------------------

def _report_to_dict(report: ExecutionReport) -> dict:
    return {
        "verdict": report.verdict.value,
        "error": None if report.error is None else {
            "error_type": report.error.error_type.value,
            "description": report.error.description,
        },
        "failing_case_index": report.failing_case_index,
        "raw_stdout": report.raw_stdout,
        "raw_stderr": report.raw_stderr,
        "wall_time": report.wall_time,
    }


def _report_from_dict(data: dict) -> ExecutionReport:
    error = data.get("error")
    return ExecutionReport(
        verdict=Verdict(data["verdict"]),
        error=None if error is None else ErrorMessage(
            error_type=ErrorType(error["error_type"]),
            description=error["description"],
        ),
        failing_case_index=data.get("failing_case_index"),
        raw_stdout=data.get("raw_stdout", ""),
        raw_stderr=data.get("raw_stderr", ""),
        wall_time=data.get("wall_time", 0.0),
    )


def trajectory_to_dict(trajectory: Trajectory) -> dict:
    return {
        "task_id": trajectory.task_id,
        "mode": trajectory.mode.value,
        "final_verdict": trajectory.final_verdict.value,
        "repair_turns": trajectory.repair_turns,
        "model_calls": trajectory.model_calls,
        "wall_time": trajectory.wall_time,
        "include_generation": trajectory.include_generation,
        "abort_reason": trajectory.abort_reason,
        "initial_report": None if trajectory.initial_report is None
        else _report_to_dict(trajectory.initial_report),
        "turns": [
            {
                "turn_index": turn.turn_index,
                "code": turn.code,
                "calls_this_turn": turn.calls_this_turn,
                "cor": None if turn.cor is None else {
                    "raw": turn.cor.raw, "reason": turn.cor.reason, "plan": turn.cor.plan,
                },
                "report": _report_to_dict(turn.report),
            }
            for turn in trajectory.turns
        ],
    }


def trajectory_from_dict(data: dict) -> Trajectory:
    turns = tuple(
        TurnRecord(
            turn_index=t["turn_index"],
            code=t["code"],
            report=_report_from_dict(t["report"]),
            cor=None if t.get("cor") is None else CoRText(
                raw=t["cor"]["raw"], reason=t["cor"]["reason"], plan=t["cor"]["plan"],
            ),
            calls_this_turn=t.get("calls_this_turn", 0),
        )
        for t in data["turns"]
    )
    initial = data.get("initial_report")
    return Trajectory(
        task_id=data["task_id"],
        mode=RepairMode(data["mode"]),
        turns=turns,
        final_verdict=FinalVerdict(data["final_verdict"]),
        repair_turns=data["repair_turns"],
        model_calls=data["model_calls"],
        wall_time=data["wall_time"],
        include_generation=data.get("include_generation", True),
        initial_report=None if initial is None else _report_from_dict(initial),
        abort_reason=data.get("abort_reason"),
    )


def trajectory_filename(task_id: str) -> str:
    safe = re.sub(r"[^A-Za-z0-9._-]", "_", task_id)
    if safe != task_id:
        safe += "-" + hashlib.sha1(task_id.encode()).hexdigest()[:8]
    return safe + ".json"


def save_trajectory(trajectory: Trajectory, out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / trajectory_filename(trajectory.task_id)
    path.write_text(json.dumps(trajectory_to_dict(trajectory), ensure_ascii=False, indent=1),
                    encoding="utf-8")
    return path


def load_trajectory(path: str | Path) -> Trajectory:
    return trajectory_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def load_trajectory_dir(trajectory_dir: str | Path) -> list[Trajectory]:
    trajectory_dir = Path(trajectory_dir)
    trajectories = [load_trajectory(p) for p in sorted(trajectory_dir.glob("*.json"))]
    return sorted(trajectories, key=lambda t: t.task_id)


MANIFEST_NAME = "manifest.jsonl"


def write_manifest(trajectories: Iterable[Trajectory], out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / MANIFEST_NAME
    with path.open("w", encoding="utf-8") as fh:
        for t in sorted(trajectories, key=lambda t: t.task_id):
            fh.write(json.dumps({
                "task_id": t.task_id,
                "final_verdict": t.final_verdict.value,
                "repair_turns": t.repair_turns,
                "model_calls": t.model_calls,
                "wall_time": t.wall_time,
            }, ensure_ascii=False) + "\n")
    return path


def run_batch(items: TaskSet | CodeErrorSet | Iterable[Task | CodeErrorEntry],
              config: RepairConfig, parallelism: int = 1,
              out_dir: str | Path | None = None, resume: bool = False, *,
              execute: Executor = run_candidate,
              templates: Mapping[PromptMode, PromptTemplate] | None = None) -> list[Trajectory]:
    """Run episodes for every item, order-stable by task_id.

    Per-item failures never abort the batch: an item that raises is recorded
    as an unresolved trajectory with the exception as its abort reason.  When
    an output directory is given, each trajectory is persisted as it
    completes, and with ``resume`` items whose trajectory file already loads
    are skipped, so a killed run picks up where it left off.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    ordered = sorted(items, key=lambda item: _item_task(item).task_id)
    templates = templates or load_templates(config.template_dir)
    trajectory_dir = Path(out_dir) / "trajectories" if out_dir is not None else None

    def one(item: Task | CodeErrorEntry) -> Trajectory:
        task_id = _item_task(item).task_id
        if trajectory_dir is not None and resume:
            existing = trajectory_dir / trajectory_filename(task_id)
            if existing.exists():
                try:
                    done = load_trajectory(existing)
                    log.info("resume: skipping completed %s", task_id)
                    return done
                except (ValueError, KeyError, json.JSONDecodeError):
                    log.warning("resume: corrupt trajectory for %s, re-running", task_id)
        try:
            trajectory = run_episode(item, config, execute=execute, templates=templates)
        except Exception as exc:  # noqa: BLE001 - item isolation is the contract
            log.error("episode for %s failed: %s", task_id, exc)
            trajectory = Trajectory(
                task_id=task_id,
                mode=config.mode,
                turns=(),
                final_verdict=FinalVerdict.UNRESOLVED,
                repair_turns=0,
                model_calls=0,
                wall_time=0.0,
                include_generation=config.include_generation,
                abort_reason=str(exc),
            )
        if trajectory_dir is not None:
            save_trajectory(trajectory, trajectory_dir)
        return trajectory

    results: list[Trajectory] = []
    try:
        if parallelism == 1:
            for item in ordered:
                results.append(one(item))
        else:
            with concurrent.futures.ThreadPoolExecutor(max_workers=parallelism) as pool:
                futures = [pool.submit(one, item) for item in ordered]
                try:
                    for future in concurrent.futures.as_completed(futures):
                        results.append(future.result())
                except BaseException:
                    for future in futures:
                        future.cancel()
                    raise
    finally:
        # Flush whatever completed so an interrupted run leaves a usable
        # manifest next to the per-item trajectory files.
        if out_dir is not None and results:
            write_manifest(results, out_dir)

    return sorted(results, key=lambda t: t.task_id)
