from __future__ import annotations

import json
from pathlib import Path

import pytest

from repairloop.agents import Backend, ChatModelConfig
from repairloop.corpus import (
    CodeErrorEntry,
    ErrorMessage,
    ErrorType,
    Provenance,
    Task,
    TaskCategory,
    TaskSet,
    TestStyle,
    TestSuite,
)
from repairloop.sandbox import ExecLimits, ExecutionReport, Verdict

CORRECT_SQUARE = "def square(x):\n    return x * x\n"
BUGGY_SQUARE = "def square(x):\n    return x + x\n"

SQUARE_CASES = ("assert square(3) == 9", "assert square(-2) == 4")


def scripted(*responses: str) -> ChatModelConfig:
    return ChatModelConfig(backend=Backend.SCRIPTED, script=tuple(responses))


def fenced(code: str) -> str:
    return f"```python\n{code}```"


def make_task(task_id: str = "t/1", cases: tuple = SQUARE_CASES,
              description: str = "Write square(x) returning x squared.",
              category: TaskCategory = TaskCategory.BASIC,
              harness: str | None = None) -> Task:
    return Task(
        task_id=task_id,
        description=description,
        tests=TestSuite(style=TestStyle.ASSERTION, cases=cases, harness=harness),
        category=category,
    )


def make_entry(task_id: str = "t/1", buggy_code: str = BUGGY_SQUARE,
               error_type: ErrorType = ErrorType.ASSERTION_ERROR,
               category: TaskCategory = TaskCategory.BASIC,
               cases: tuple = SQUARE_CASES) -> CodeErrorEntry:
    return CodeErrorEntry(
        task=make_task(task_id, cases=cases, category=category),
        buggy_code=buggy_code,
        error=ErrorMessage(error_type, "AssertionError\nfailing case [0]"),
        provenance=Provenance.MODEL_GENERATED,
    )


def fake_execute(code: str, suite, limits, runner) -> ExecutionReport:
    """Instant executor for loop-logic tests: code containing PASS passes."""
    if "PASS" in code:
        return ExecutionReport(verdict=Verdict.PASSED)
    return ExecutionReport(
        verdict=Verdict.FAILED,
        error=ErrorMessage(ErrorType.ASSERTION_ERROR, "AssertionError\nat: assert f()"),
        failing_case_index=0,
    )


def write_jsonl(path: Path, records: list[dict]) -> Path:
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return path


@pytest.fixture
def fast_limits() -> ExecLimits:
    return ExecLimits(timeout_s=10.0)


def seeded_build_fixture() -> tuple[TaskSet, dict[str, str], dict[str, ErrorType]]:
    """Ten candidates: four pass, six fail with deliberately seeded errors.

    The expected-type map is the seeding plan and serves as the oracle for
    the builder tests.
    """
    def simple_task(task_id: str, case: str, category: TaskCategory) -> Task:
        return Task(
            task_id=task_id,
            description=f"toy problem {task_id}",
            tests=TestSuite(style=TestStyle.ASSERTION, cases=(case,)),
            category=category,
        )

    tasks = TaskSet((
        simple_task("b01", "assert add(2, 3) == 5", TaskCategory.BASIC),
        simple_task("b02", "assert add(2, 3) == 5", TaskCategory.BASIC),
        simple_task("b03", "assert mul(2, 3) == 6", TaskCategory.COMPETITION),
        simple_task("b04", "assert greet() == 'hi'", TaskCategory.COMPETITION),
        simple_task("b05", "assert join_num(1) == '1'", TaskCategory.COMPETITION),
        simple_task("b06", "assert ident(7) == 7", TaskCategory.DATA_ANALYSIS),
        simple_task("b07", "assert spin() == 0", TaskCategory.BASIC),
        simple_task("b08", "assert ident(1) == 1", TaskCategory.BASIC),
        simple_task("b09", "assert first([]) == None", TaskCategory.COMPETITION),
        simple_task("b10", "assert const() == 4", TaskCategory.DATA_ANALYSIS),
    ))
    candidates = {
        "b01": "def add(a, b):\n    return a + b\n",
        "b02": "def add(a, b):\n    return a - b\n",
        "b03": "def mul(a, b):\n    return a * b\n",
        "b04": "def greet():\n    return make_greeting()\n",
        "b05": "def join_num(n):\n    return 'n=' + n\n",
        "b06": "def ident(x:\n    return x\n",
        "b07": "def spin():\n    while True:\n        pass\n",
        "b08": "def ident(x):\n    return x\n",
        "b09": "def first(xs):\n    return xs[0]\n",
        "b10": "def const():\n    return 4\n",
    }
    expected_failures = {
        "b02": ErrorType.ASSERTION_ERROR,
        "b04": ErrorType.NAME_ERROR,
        "b05": ErrorType.TYPE_ERROR,
        "b06": ErrorType.SYNTAX_ERROR,
        "b07": ErrorType.TIMEOUT,
        "b09": ErrorType.INDEX_ERROR,
    }
    return tasks, candidates, expected_failures
