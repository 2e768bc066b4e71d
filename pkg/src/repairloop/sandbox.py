"""Run candidate code against a test suite in an isolated child process.

Isolation model: each case runs in its own child process inside a fresh
temporary working directory, with the environment cleared down to an
allowlist, a per-case wall-clock timeout, and captured output truncated to a
byte cap.  There is no OS-level container in-tree; operators who need a
stronger jail can point ``RunnerConfig.command`` at their own wrapper
(firejail, docker, ...).  Network use is disallowed by policy but not
enforced here.

A process-wide semaphore bounds the number of concurrent child processes, so
``run_candidate`` is safe to call from many threads at once.
"""

from __future__ import annotations

import logging
import os
import re
import shlex
import subprocess
import sys
import tempfile
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .corpus import ErrorMessage, ErrorType, StdioCase, TestStyle, TestSuite

log = logging.getLogger(__name__)

# Extra seconds a child may take to die after its timeout fires.
TIMEOUT_GRACE_S = 2.0


class Verdict(str, Enum):
    PASSED = "passed"
    FAILED = "failed"
    TIMEOUT = "timeout"
    RUNNER_ERROR = "runner_error"


@dataclass(frozen=True)
class ExecLimits:
    """Per-case execution limits.

    ``timeout_s`` bounds each case's wall-clock time; ``max_output_bytes``
    caps the stdout/stderr kept in the report.  The working directory is
    always a fresh temporary directory per run.
    """

    timeout_s: float = 10.0
    max_output_bytes: int = 16384

    def __post_init__(self):
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be > 0")
        if self.max_output_bytes <= 0:
            raise ValueError("max_output_bytes must be > 0")


@dataclass(frozen=True)
class RunnerConfig:
    """Command template for the language runtime.

    ``command`` tokens may contain the placeholders ``{file}`` (path of the
    candidate script) and ``{stdin}`` (path of a file holding the case's
    input; when absent, input is piped).  ``compile_command`` runs once per
    candidate before any case, for compiled languages.
    """

    command: tuple[str, ...] = (sys.executable, "-I", "{file}")
    compile_command: tuple[str, ...] | None = None
    file_extension: str = ".py"
    env_allowlist: tuple[str, ...] = ("PATH", "LANG", "LC_ALL")

    @staticmethod
    def from_raw(raw: object) -> tuple[str, ...]:
        """Accept a command given either as an argv list or a shell-ish string."""
        if isinstance(raw, str):
            return tuple(shlex.split(raw))
        return tuple(str(token) for token in raw)  # type: ignore[union-attr]


@dataclass(frozen=True)
class ExecutionReport:
    verdict: Verdict
    error: ErrorMessage | None = None
    failing_case_index: int | None = None
    raw_stdout: str = ""
    raw_stderr: str = ""
    wall_time: float = 0.0

    def __post_init__(self):
        if self.verdict is Verdict.FAILED and self.error is None:
            raise ValueError("failed report requires an error")

    @property
    def passed(self) -> bool:
        return self.verdict is Verdict.PASSED


_process_gate = threading.BoundedSemaphore(os.cpu_count() or 4)


def set_max_concurrency(n: int) -> None:
    """Bound the number of concurrently running child processes."""
    global _process_gate
    if n < 1:
        raise ValueError("concurrency bound must be >= 1")
    _process_gate = threading.BoundedSemaphore(n)


def classify_error(diagnostic_head: str) -> ErrorType:
    """Map the token before the first ':' of a diagnostic line to the taxonomy.

    Exact-name match only; derived exception names are not resolved to their
    bases, and unknown names map to ``OTHER``.  Total: never raises.
    """
    head = str(diagnostic_head).strip()
    try:
        return ErrorType(head)
    except ValueError:
        return ErrorType.OTHER


_FRAME_RE = re.compile(r'^\s*File "[^"]*", line \d+')
_SYNTAX_FRAME_RE = re.compile(r'^\s*File "[^"]*", line \d+\s*$')
_MARKER_RE = re.compile(r"^[\s^~]+$")
_REPEAT_RE = re.compile(r"^\s*\[Previous line repeated \d+ more times\]")


def parse_traceback(stderr: str) -> ErrorMessage:
    """Extract and classify the final diagnostic from interpreter stderr.

    Returns the last diagnostic line (``SomeError: message``) plus the
    deepest offending source line when a traceback frame is present.
    Unparseable input yields ``Other`` with the raw tail as description.
    """
    lines = stderr.splitlines()
    non_empty = [ln for ln in lines if ln.strip()]
    if not non_empty:
        return ErrorMessage(ErrorType.OTHER, "no diagnostic output")

    diagnostic = non_empty[-1].strip()
    head = diagnostic.split(":", 1)[0].strip()
    error_type = classify_error(head)

    offending = _deepest_source_line(lines)
    description = diagnostic
    if offending:
        description += f"\nat: {offending}"
    if error_type is ErrorType.OTHER and not _looks_like_diagnostic(diagnostic):
        # No recognizable final line: keep a short raw tail instead.
        tail = "\n".join(non_empty[-3:])
        description = tail
        if offending:
            description += f"\nat: {offending}"
    return ErrorMessage(error_type, description)


def _looks_like_diagnostic(line: str) -> bool:
    return re.match(r"^[A-Za-z_][\w.]*(:|$)", line) is not None


def _deepest_source_line(lines: list[str]) -> str | None:
    source = None
    for i, line in enumerate(lines):
        if not _FRAME_RE.match(line):
            continue
        for nxt in lines[i + 1:]:
            if not nxt.strip():
                continue
            if _MARKER_RE.match(nxt) or _REPEAT_RE.match(nxt) or _FRAME_RE.match(nxt):
                break
            if nxt[:1].isspace():
                source = nxt.strip()
            break
    return source


def describe_failure(report: ExecutionReport, limit: int = 2000) -> str:
    """Render a report as compact feedback text for a repair prompt.

    Keeps the classified diagnostic (which already carries the offending line
    and failing case) and caps the result, so unbounded tracebacks never blow
    up a prompt.
    """
    if report.error is not None:
        text = f"{report.error.error_type.value}: {report.error.description}" \
            if not report.error.description.startswith(report.error.error_type.value) \
            else report.error.description
    elif report.verdict is Verdict.PASSED:
        text = "all test cases passed"
    else:
        text = report.raw_stderr.strip() or "execution failed with no diagnostic output"
    if len(text) > limit:
        text = text[: limit - 15].rstrip() + "\n...[truncated]"
    return text


def _truncate(data: bytes, max_bytes: int) -> str:
    if len(data) > max_bytes:
        data = data[:max_bytes]
    return data.decode("utf-8", errors="replace")


def _child_env(runner: RunnerConfig, workdir: Path) -> dict[str, str]:
    env = {name: os.environ[name] for name in runner.env_allowlist if name in os.environ}
    env["HOME"] = str(workdir)
    env["TMPDIR"] = str(workdir)
    env["PYTHONDONTWRITEBYTECODE"] = "1"
    return env


@dataclass
class _CaseOutcome:
    ok: bool
    timed_out: bool = False
    spawn_error: str | None = None
    stdout: bytes = b""
    stderr: bytes = b""
    returncode: int = 0
    elapsed: float = 0.0


def _run_process(argv: list[str], *, stdin_text: str | None, workdir: Path,
                 limits: ExecLimits, runner: RunnerConfig) -> _CaseOutcome:
    start = time.monotonic()
    with _process_gate:
        try:
            proc = subprocess.run(
                argv,
                input=stdin_text.encode() if stdin_text is not None else None,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                cwd=workdir,
                env=_child_env(runner, workdir),
                timeout=limits.timeout_s,
            )
        except subprocess.TimeoutExpired as exc:
            return _CaseOutcome(
                ok=False,
                timed_out=True,
                stdout=exc.stdout or b"",
                stderr=exc.stderr or b"",
                elapsed=time.monotonic() - start,
            )
        except OSError as exc:
            return _CaseOutcome(ok=False, spawn_error=str(exc),
                                elapsed=time.monotonic() - start)
    return _CaseOutcome(
        ok=proc.returncode == 0,
        stdout=proc.stdout,
        stderr=proc.stderr,
        returncode=proc.returncode,
        elapsed=time.monotonic() - start,
    )


def _fill_command(template: tuple[str, ...], file_path: Path,
                  stdin_path: Path | None) -> list[str]:
    argv = []
    for token in template:
        token = token.replace("{file}", str(file_path))
        if stdin_path is not None:
            token = token.replace("{stdin}", str(stdin_path))
        argv.append(token)
    return argv


def _assertion_script(code: str, suite: TestSuite, case: str) -> str:
    parts = [code.rstrip()]
    if suite.harness:
        parts.append(suite.harness.rstrip())
    parts.append(case.rstrip())
    return "\n\n".join(parts) + "\n"


def _normalize_stdout(text: str) -> str:
    # Trailing whitespace per line and trailing newlines only; leading
    # whitespace and interior spacing are significant.
    lines = [line.rstrip() for line in text.splitlines()]
    while lines and not lines[-1]:
        lines.pop()
    return "\n".join(lines)


def run_candidate(code: str, suite: TestSuite, limits: ExecLimits | None = None,
                  runner: RunnerConfig | None = None) -> ExecutionReport:
    """Execute candidate code against a suite, one fresh process per case.

    Stops at the first failing case and reports its index, classified
    diagnostic, and captured output.  Assertion cases run as
    ``code + harness + case`` scripts; stdio cases pipe the input and compare
    stdout after trailing-whitespace normalization.
    """
    limits = limits or ExecLimits()
    runner = runner or RunnerConfig()
    total_time = 0.0
    last_stdout = ""
    last_stderr = ""

    with tempfile.TemporaryDirectory(prefix="repairloop-") as tmp:
        workdir = Path(tmp)

        if runner.compile_command is not None:
            source = workdir / f"candidate{runner.file_extension}"
            source.write_text(code, encoding="utf-8")
            outcome = _run_process(
                _fill_command(runner.compile_command, source, None),
                stdin_text=None, workdir=workdir, limits=limits, runner=runner,
            )
            total_time += outcome.elapsed
            if outcome.spawn_error is not None:
                return _runner_error(outcome, total_time, limits)
            if outcome.timed_out or not outcome.ok:
                return _failure_report(outcome, None, None, total_time, limits)

        for index, case in enumerate(suite.cases):
            if suite.style is TestStyle.ASSERTION:
                script = _assertion_script(code, suite, case)
                stdin_text: str | None = None
                case_label = case
            else:
                assert isinstance(case, StdioCase)
                script = code
                stdin_text = case.input
                case_label = f"input: {case.input!r}"

            case_file = workdir / f"case_{index}{runner.file_extension}"
            case_file.write_text(script, encoding="utf-8")

            stdin_path = None
            if stdin_text is not None and any("{stdin}" in t for t in runner.command):
                stdin_path = workdir / f"case_{index}.in"
                stdin_path.write_text(stdin_text, encoding="utf-8")
                stdin_text = None

            outcome = _run_process(
                _fill_command(runner.command, case_file, stdin_path),
                stdin_text=stdin_text, workdir=workdir, limits=limits, runner=runner,
            )
            total_time += outcome.elapsed
            last_stdout = _truncate(outcome.stdout, limits.max_output_bytes)
            last_stderr = _truncate(outcome.stderr, limits.max_output_bytes)

            if outcome.spawn_error is not None:
                return _runner_error(outcome, total_time, limits)
            if outcome.timed_out or not outcome.ok:
                return _failure_report(outcome, index, case_label, total_time, limits)

            if suite.style is TestStyle.STDIO:
                assert isinstance(case, StdioCase)
                got = _normalize_stdout(outcome.stdout.decode("utf-8", errors="replace"))
                want = _normalize_stdout(case.output)
                if got != want:
                    error = ErrorMessage(
                        ErrorType.ASSERTION_ERROR,
                        f"output mismatch\nexpected: {want!r}\ngot: {got!r}"
                        f"\nfailing case [{index}]: {case_label}",
                    )
                    return ExecutionReport(
                        verdict=Verdict.FAILED,
                        error=error,
                        failing_case_index=index,
                        raw_stdout=last_stdout,
                        raw_stderr=last_stderr,
                        wall_time=total_time,
                    )

    return ExecutionReport(
        verdict=Verdict.PASSED,
        raw_stdout=last_stdout,
        raw_stderr=last_stderr,
        wall_time=total_time,
    )


def _runner_error(outcome: _CaseOutcome, total_time: float, limits: ExecLimits) -> ExecutionReport:
    return ExecutionReport(
        verdict=Verdict.RUNNER_ERROR,
        error=ErrorMessage(ErrorType.OTHER, f"runner could not start: {outcome.spawn_error}"),
        raw_stdout="",
        raw_stderr="",
        wall_time=total_time,
    )


def _failure_report(outcome: _CaseOutcome, index: int | None, case_label: str | None,
                    total_time: float, limits: ExecLimits) -> ExecutionReport:
    stdout = _truncate(outcome.stdout, limits.max_output_bytes)
    stderr = _truncate(outcome.stderr, limits.max_output_bytes)
    if outcome.timed_out:
        description = f"execution timed out after {limits.timeout_s:g}s"
        if case_label is not None:
            description += f"\nfailing case [{index}]: {case_label}"
        return ExecutionReport(
            verdict=Verdict.TIMEOUT,
            error=ErrorMessage(ErrorType.TIMEOUT, description),
            failing_case_index=index,
            raw_stdout=stdout,
            raw_stderr=stderr,
            wall_time=total_time,
        )
    parsed = parse_traceback(outcome.stderr.decode("utf-8", errors="replace"))
    description = parsed.description
    if case_label is not None:
        description += f"\nfailing case [{index}]: {case_label}"
    return ExecutionReport(
        verdict=Verdict.FAILED,
        error=ErrorMessage(parsed.error_type, description),
        failing_case_index=index,
        raw_stdout=stdout,
        raw_stderr=stderr,
        wall_time=total_time,
    )
