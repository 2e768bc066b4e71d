"""Task and repair-benchmark corpora: domain types plus JSONL loaders/writers.

Two record shapes share one internal schema (see README "File formats"):

* generation tasks: ``task_id``, ``description``, ``test_style``, ``tests``,
  ``category``, ``language``, plus optional ``entry_point`` / ``test_harness``
* repair entries: the same fields plus ``buggy_code``, ``error_type``,
  ``error_message``, ``provenance``

Loaders for the two public benchmark formats (HumanEval-style and MBPP-style
release files) map their native fields into this schema.  Loaded sets are
immutable and safe to share across threads.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

import ast

log = logging.getLogger(__name__)


class SchemaError(ValueError):
    """A record in an input file does not match the expected schema."""

    def __init__(self, message: str, *, line: int | None = None, field_name: str | None = None):
        self.line = line
        self.field_name = field_name
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")


class ErrorType(str, Enum):
    """Failure taxonomy shared by the corpus and the execution sandbox.

    Classification is by exact exception name; subclasses of known types are
    not folded in, and any unknown name maps to ``OTHER``.
    """

    PASSED = "Passed"
    ASSERTION_ERROR = "AssertionError"
    NAME_ERROR = "NameError"
    TYPE_ERROR = "TypeError"
    INDEX_ERROR = "IndexError"
    VALUE_ERROR = "ValueError"
    SYNTAX_ERROR = "SyntaxError"
    ATTRIBUTE_ERROR = "AttributeError"
    RECURSION_ERROR = "RecursionError"
    TIMEOUT = "Timeout"
    OTHER = "Other"


@dataclass(frozen=True)
class ErrorMessage:
    """A classified diagnostic: error type plus a human-readable description.

    The description carries the diagnostic line, the offending source line
    when a traceback frame was available, and the failing test case when
    known.  It must be non-empty for anything other than ``PASSED``.
    """

    error_type: ErrorType
    description: str = ""

    def __post_init__(self):
        if self.error_type is not ErrorType.PASSED and not self.description:
            raise ValueError("error description required when error_type != Passed")


class TaskCategory(str, Enum):
    BASIC = "basic"
    COMPETITION = "comp"
    DATA_ANALYSIS = "da"


class TestStyle(str, Enum):
    ASSERTION = "assertion"
    STDIO = "stdio"


class Provenance(str, Enum):
    MODEL_GENERATED = "model"
    USER_SUBMITTED = "user"


@dataclass(frozen=True)
class StdioCase:
    """One stdin/stdout test: input text and the expected output text."""

    input: str
    output: str


@dataclass(frozen=True)
class TestSuite:
    """A uniform-style test suite.

    Assertion suites hold executable statements (usually ``assert ...``) in
    ``cases`` plus an optional harness that is executed after the candidate
    code and before each case (helper definitions, a ``candidate = f`` alias,
    a ``check`` function, ...).  Stdio suites hold ``StdioCase`` pairs and
    ignore ``harness``.
    """

    style: TestStyle
    cases: tuple
    harness: str | None = None

    def __post_init__(self):
        if not self.cases:
            raise ValueError("test suite must contain at least one case")
        if self.style is TestStyle.ASSERTION:
            bad = [c for c in self.cases if not isinstance(c, str)]
        else:
            bad = [c for c in self.cases if not isinstance(c, StdioCase)]
        if bad:
            raise ValueError(f"mixed or mistyped cases for {self.style.value} suite")

    def __len__(self) -> int:
        return len(self.cases)


@dataclass(frozen=True)
class Task:
    """One code-generation problem."""

    task_id: str
    description: str
    tests: TestSuite
    entry_point: str | None = None
    category: TaskCategory = TaskCategory.BASIC
    language: str = "python"

    def __post_init__(self):
        if not self.task_id:
            raise ValueError("task_id must be non-empty")


@dataclass(frozen=True)
class CodeErrorEntry:
    """One repair problem: a task, a buggy candidate, and its diagnostic."""

    task: Task
    buggy_code: str
    error: ErrorMessage
    provenance: Provenance = Provenance.MODEL_GENERATED

    def __post_init__(self):
        if not self.buggy_code:
            raise ValueError("buggy_code must be non-empty")

    @property
    def task_id(self) -> str:
        return self.task.task_id


@dataclass(frozen=True)
class TaskSet:
    tasks: tuple[Task, ...] = ()

    def __post_init__(self):
        _check_unique_ids(t.task_id for t in self.tasks)

    def __len__(self) -> int:
        return len(self.tasks)

    def __iter__(self) -> Iterator[Task]:
        return iter(self.tasks)

    def by_id(self, task_id: str) -> Task:
        for t in self.tasks:
            if t.task_id == task_id:
                return t
        raise KeyError(task_id)


@dataclass(frozen=True)
class CodeErrorSet:
    entries: tuple[CodeErrorEntry, ...] = ()

    def __post_init__(self):
        _check_unique_ids(e.task_id for e in self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[CodeErrorEntry]:
        return iter(self.entries)

    def by_id(self, task_id: str) -> CodeErrorEntry:
        for e in self.entries:
            if e.task_id == task_id:
                return e
        raise KeyError(task_id)

    def tasks(self) -> TaskSet:
        return TaskSet(tuple(e.task for e in self.entries))


def _check_unique_ids(ids: Iterable[str]) -> None:
    seen: set[str] = set()
    for task_id in ids:
        if task_id in seen:
            raise SchemaError(f"duplicate task_id {task_id!r}")
        seen.add(task_id)


class TaskFormat(str, Enum):
    HUMANEVAL_JSONL = "humaneval"
    MBPP_JSONL = "mbpp"
    GENERIC = "generic"


# MBPP's evaluation split, by convention of the release file.
MBPP_EVAL_ID_RANGE = (11, 510)


def _iter_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc}", line=line_no) from exc
            if not isinstance(record, dict):
                raise SchemaError("record is not a JSON object", line=line_no)
            yield line_no, record


def _require(record: dict, field_name: str, line_no: int):
    if field_name not in record:
        raise SchemaError(f"missing field {field_name!r}", line=line_no, field_name=field_name)
    return record[field_name]


def load_tasks(path: str | Path, format: TaskFormat = TaskFormat.GENERIC,
               eval_slice: bool = False) -> TaskSet:
    """Load generation tasks from a JSONL file in the given format.

    ``eval_slice`` applies to the MBPP format only and keeps the conventional
    evaluation slice (task IDs 11-510).
    """
    format = TaskFormat(format)
    tasks: list[Task] = []
    for line_no, record in _iter_jsonl(path):
        if format is TaskFormat.HUMANEVAL_JSONL:
            tasks.append(_task_from_humaneval(record, line_no))
        elif format is TaskFormat.MBPP_JSONL:
            task = _task_from_mbpp(record, line_no)
            if eval_slice:
                lo, hi = MBPP_EVAL_ID_RANGE
                try:
                    raw_id = int(task.task_id)
                except ValueError:
                    continue
                if not lo <= raw_id <= hi:
                    continue
            tasks.append(task)
        else:
            tasks.append(_task_from_generic(record, line_no))
    return TaskSet(tuple(tasks))


def _task_from_humaneval(record: dict, line_no: int) -> Task:
    task_id = str(_require(record, "task_id", line_no))
    prompt = str(_require(record, "prompt", line_no))
    test_text = str(_require(record, "test", line_no))
    entry_point = record.get("entry_point")
    suite = _suite_from_check_harness(test_text, entry_point)
    return Task(
        task_id=task_id,
        description=prompt,
        tests=suite,
        entry_point=entry_point,
        category=TaskCategory.BASIC,
    )


def _suite_from_check_harness(test_text: str, entry_point: str | None) -> TestSuite:
    """Build an assertion suite from a ``def check(candidate)`` harness.

    When the check body is a plain list of asserts, each assert becomes one
    case, which preserves per-case failure attribution.  Check bodies with
    loops or setup statements fall back to a single ``check(candidate)``
    case.  The full harness text is kept either way, followed by a
    ``candidate = <entry_point>`` alias so cases can run standalone.
    """
    harness = test_text.rstrip()
    if entry_point:
        harness += f"\n\ncandidate = {entry_point}"
    cases = _extract_check_asserts(test_text)
    if not cases:
        cases = ["check(candidate)"]
    return TestSuite(style=TestStyle.ASSERTION, cases=tuple(cases), harness=harness)


def _extract_check_asserts(test_text: str) -> list[str]:
    try:
        tree = ast.parse(test_text)
    except SyntaxError:
        return []
    check = next(
        (n for n in tree.body if isinstance(n, ast.FunctionDef) and n.name == "check"),
        None,
    )
    if check is None:
        return []
    body = check.body
    # Tolerate a leading docstring.
    if body and isinstance(body[0], ast.Expr) and isinstance(body[0].value, ast.Constant):
        body = body[1:]
    if not body or not all(isinstance(stmt, ast.Assert) for stmt in body):
        return []
    segments = []
    for stmt in body:
        segment = ast.get_source_segment(test_text, stmt)
        if segment is None:
            return []
        segments.append("\n".join(line.strip() for line in segment.splitlines()))
    return segments


def _task_from_mbpp(record: dict, line_no: int) -> Task:
    raw_id = _require(record, "task_id", line_no)
    text = str(_require(record, "text", line_no))
    test_list = _require(record, "test_list", line_no)
    if not isinstance(test_list, list) or not test_list:
        raise SchemaError("test_list must be a non-empty array", line=line_no,
                          field_name="test_list")
    harness = record.get("test_setup_code") or None
    suite = TestSuite(
        style=TestStyle.ASSERTION,
        cases=tuple(str(t) for t in test_list),
        harness=harness,
    )
    return Task(
        task_id=str(raw_id),
        description=text,
        tests=suite,
        category=TaskCategory.BASIC,
    )


def _suite_from_generic(record: dict, line_no: int) -> TestSuite:
    style_raw = _require(record, "test_style", line_no)
    try:
        style = TestStyle(style_raw)
    except ValueError:
        raise SchemaError(f"unknown test_style {style_raw!r}", line=line_no,
                          field_name="test_style") from None
    tests = _require(record, "tests", line_no)
    if not isinstance(tests, list) or not tests:
        raise SchemaError("tests must be a non-empty array", line=line_no, field_name="tests")
    if style is TestStyle.ASSERTION:
        cases: tuple = tuple(str(t) for t in tests)
    else:
        try:
            cases = tuple(StdioCase(input=str(t["input"]), output=str(t["output"]))
                          for t in tests)
        except (TypeError, KeyError):
            raise SchemaError('stdio tests must be {"input", "output"} objects',
                              line=line_no, field_name="tests") from None
    return TestSuite(style=style, cases=cases, harness=record.get("test_harness"))


def _task_from_generic(record: dict, line_no: int) -> Task:
    task_id = str(_require(record, "task_id", line_no))
    description = str(_require(record, "description", line_no))
    suite = _suite_from_generic(record, line_no)
    category_raw = record.get("category", TaskCategory.BASIC.value)
    try:
        category = TaskCategory(category_raw)
    except ValueError:
        raise SchemaError(f"unknown category {category_raw!r}", line=line_no,
                          field_name="category") from None
    try:
        return Task(
            task_id=task_id,
            description=description,
            tests=suite,
            entry_point=record.get("entry_point"),
            category=category,
            language=str(record.get("language", "python")),
        )
    except ValueError as exc:
        raise SchemaError(str(exc), line=line_no) from exc


def load_code_error(path: str | Path) -> CodeErrorSet:
    """Load a repair benchmark file.

    Unknown ``error_type`` strings are mapped to ``Other`` with a warning so
    loading is total over the taxonomy.
    """
    entries: list[CodeErrorEntry] = []
    for line_no, record in _iter_jsonl(path):
        task = _task_from_generic(record, line_no)
        buggy_code = str(_require(record, "buggy_code", line_no))
        error_type_raw = str(_require(record, "error_type", line_no))
        try:
            error_type = ErrorType(error_type_raw)
        except ValueError:
            log.warning("line %d: unknown error_type %r mapped to Other", line_no, error_type_raw)
            error_type = ErrorType.OTHER
        error_message = str(_require(record, "error_message", line_no))
        provenance_raw = record.get("provenance", Provenance.MODEL_GENERATED.value)
        try:
            provenance = Provenance(provenance_raw)
        except ValueError:
            raise SchemaError(f"unknown provenance {provenance_raw!r}", line=line_no,
                              field_name="provenance") from None
        try:
            entries.append(CodeErrorEntry(
                task=task,
                buggy_code=buggy_code,
                error=ErrorMessage(error_type=error_type, description=error_message),
                provenance=provenance,
            ))
        except ValueError as exc:
            raise SchemaError(str(exc), line=line_no) from exc
    return CodeErrorSet(tuple(entries))


def _suite_to_fields(suite: TestSuite) -> dict:
    if suite.style is TestStyle.ASSERTION:
        tests = list(suite.cases)
    else:
        tests = [{"input": c.input, "output": c.output} for c in suite.cases]
    fields = {"test_style": suite.style.value, "tests": tests}
    if suite.harness is not None:
        fields["test_harness"] = suite.harness
    return fields


def _task_to_record(task: Task) -> dict:
    # Stable field order; optional fields omitted when absent.
    record: dict = {"task_id": task.task_id, "description": task.description}
    record.update(_suite_to_fields(task.tests))
    if task.entry_point is not None:
        record["entry_point"] = task.entry_point
    record["category"] = task.category.value
    record["language"] = task.language
    return record


def _entry_to_record(entry: CodeErrorEntry) -> dict:
    record = _task_to_record(entry.task)
    record["buggy_code"] = entry.buggy_code
    record["error_type"] = entry.error.error_type.value
    record["error_message"] = entry.error.description
    record["provenance"] = entry.provenance.value
    return record


def _write_jsonl(records: Iterable[dict], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def write_tasks(task_set: TaskSet, path: str | Path) -> None:
    """Write generation tasks in the generic JSONL schema."""
    _write_jsonl((_task_to_record(t) for t in task_set), path)


def write_code_error(entry_set: CodeErrorSet, path: str | Path) -> None:
    """Write a repair benchmark: one JSON object per line, stable field order."""
    _write_jsonl((_entry_to_record(e) for e in entry_set), path)
