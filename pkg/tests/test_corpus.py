from __future__ import annotations

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from repairloop.corpus import (
    CodeErrorEntry,
    CodeErrorSet,
    ErrorMessage,
    ErrorType,
    SchemaError,
    StdioCase,
    Task,
    TaskCategory,
    TaskFormat,
    TestStyle,
    TestSuite,
    load_code_error,
    load_tasks,
    write_code_error,
    write_tasks,
)

from .conftest import make_entry, write_jsonl


HUMANEVAL_RECORDS = [
    {
        "task_id": "HumanEval/0",
        "prompt": 'def inc(x):\n    """Return x + 1."""\n',
        "entry_point": "inc",
        "canonical_solution": "    return x + 1\n",
        "test": "METADATA = {}\n\n\ndef check(candidate):\n"
                "    assert candidate(1) == 2\n"
                "    assert candidate(0) == 1\n"
                "    assert candidate(-1) == 0\n",
    },
    {
        "task_id": "HumanEval/1",
        "prompt": 'def double_all(xs):\n    """Double every element."""\n',
        "entry_point": "double_all",
        "test": "def check(candidate):\n"
                "    inputs = [[1], [2, 3]]\n"
                "    for xs in inputs:\n"
                "        assert candidate(xs) == [2 * v for v in xs]\n",
    },
]

MBPP_RECORDS = [
    {
        "task_id": 11,
        "text": "Write a function to remove occurrences of a character.",
        "code": "def remove_occ(s, ch): ...",
        "test_list": [
            'assert remove_occ("hello","l") == "heo"',
            'assert remove_occ("abcda","a") == "bcd"',
            'assert remove_occ("PHP","P") == "H"',
        ],
        "test_setup_code": "",
    },
    {
        "task_id": 510,
        "text": "Write a function to add two numbers.",
        "code": "def add(a, b): ...",
        "test_list": ["assert add(1, 2) == 3"],
    },
    {
        "task_id": 600,
        "text": "Outside the evaluation slice.",
        "code": "def f(): ...",
        "test_list": ["assert f() is None"],
    },
]


def test_load_humaneval_maps_fields_and_extracts_cases(tmp_path):
    path = write_jsonl(tmp_path / "he.jsonl", HUMANEVAL_RECORDS)
    tasks = load_tasks(path, TaskFormat.HUMANEVAL_JSONL)
    assert len(tasks) == 2

    t0 = tasks.by_id("HumanEval/0")
    assert t0.entry_point == "inc"
    assert t0.description.startswith("def inc")
    assert t0.category is TaskCategory.BASIC
    assert t0.tests.style is TestStyle.ASSERTION
    assert t0.tests.cases == (
        "assert candidate(1) == 2",
        "assert candidate(0) == 1",
        "assert candidate(-1) == 0",
    )
    assert t0.tests.harness.endswith("candidate = inc")

    # A check body with loops cannot be split; it collapses to one case.
    t1 = tasks.by_id("HumanEval/1")
    assert t1.tests.cases == ("check(candidate)",)


def test_load_mbpp_maps_asserts_one_case_each(tmp_path):
    path = write_jsonl(tmp_path / "mbpp.jsonl", MBPP_RECORDS)
    tasks = load_tasks(path, TaskFormat.MBPP_JSONL)
    assert len(tasks) == 3
    t = tasks.by_id("11")
    assert len(t.tests.cases) == 3
    assert t.tests.harness is None
    assert t.description.startswith("Write a function")


def test_mbpp_eval_slice_keeps_11_to_510(tmp_path):
    path = write_jsonl(tmp_path / "mbpp.jsonl", MBPP_RECORDS)
    tasks = load_tasks(path, TaskFormat.MBPP_JSONL, eval_slice=True)
    assert sorted(t.task_id for t in tasks) == ["11", "510"]


def test_empty_file_gives_empty_set(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("", encoding="utf-8")
    assert len(load_tasks(path, TaskFormat.HUMANEVAL_JSONL)) == 0


def test_missing_field_names_field_and_line(tmp_path):
    records = [HUMANEVAL_RECORDS[0], {"task_id": "HumanEval/9", "prompt": "def f():\n"}]
    path = write_jsonl(tmp_path / "he.jsonl", records)
    with pytest.raises(SchemaError) as exc:
        load_tasks(path, TaskFormat.HUMANEVAL_JSONL)
    assert "'test'" in str(exc.value)
    assert "line 2" in str(exc.value)
    assert exc.value.field_name == "test"


def test_duplicate_task_id_rejected(tmp_path):
    path = write_jsonl(tmp_path / "he.jsonl", [HUMANEVAL_RECORDS[0]] * 2)
    with pytest.raises(SchemaError, match="duplicate"):
        load_tasks(path, TaskFormat.HUMANEVAL_JSONL)


def test_code_error_round_trip(tmp_path):
    entries = CodeErrorSet((
        make_entry("t/1"),
        make_entry("t/2", error_type=ErrorType.TYPE_ERROR),
    ))
    path = tmp_path / "ce.jsonl"
    write_code_error(entries, path)
    assert load_code_error(path) == entries


def test_single_entry_write_is_stable_bytes(tmp_path):
    entries = CodeErrorSet((make_entry("t/1"),))
    first = tmp_path / "a.jsonl"
    second = tmp_path / "b.jsonl"
    write_code_error(entries, first)
    write_code_error(load_code_error(first), second)
    assert first.read_bytes() == second.read_bytes()
    assert len(first.read_text(encoding="utf-8").strip().splitlines()) == 1


def test_multiline_traceback_stays_one_record_per_line(tmp_path):
    entry = CodeErrorEntry(
        task=make_entry("t/1").task,
        buggy_code="def f():\n    raise ValueError\n",
        error=ErrorMessage(ErrorType.VALUE_ERROR,
                           "Traceback (most recent call last):\n  File ...\nValueError"),
    )
    path = tmp_path / "ce.jsonl"
    write_code_error(CodeErrorSet((entry,)), path)
    assert len(path.read_text(encoding="utf-8").strip().splitlines()) == 1
    assert load_code_error(path).by_id("t/1").error.description.count("\n") == 2


def test_unknown_error_type_maps_to_other_with_warning(tmp_path, caplog):
    records = [{
        "task_id": "x", "description": "d", "test_style": "assertion",
        "tests": ["assert f() == 1"], "category": "basic", "language": "python",
        "buggy_code": "def f(): return 2", "error_type": "WeirdError",
        "error_message": "WeirdError: odd", "provenance": "model",
    }]
    path = write_jsonl(tmp_path / "ce.jsonl", records)
    with caplog.at_level("WARNING"):
        entries = load_code_error(path)
    assert entries.by_id("x").error.error_type is ErrorType.OTHER
    assert "WeirdError" in caplog.text


def test_stdio_suite_round_trips(tmp_path):
    task = Task(
        task_id="s/1",
        description="Echo the sum.",
        tests=TestSuite(style=TestStyle.STDIO,
                        cases=(StdioCase(input="3 5", output="8"),)),
        category=TaskCategory.COMPETITION,
    )
    entry = CodeErrorEntry(task=task, buggy_code="print(9)",
                           error=ErrorMessage(ErrorType.ASSERTION_ERROR, "mismatch"))
    path = tmp_path / "ce.jsonl"
    write_code_error(CodeErrorSet((entry,)), path)
    loaded = load_code_error(path)
    assert loaded.by_id("s/1").task.tests.cases == (StdioCase(input="3 5", output="8"),)


def test_generic_tasks_round_trip(tmp_path):
    entries = CodeErrorSet((make_entry("t/1"),))
    tasks = entries.tasks()
    path = tmp_path / "tasks.jsonl"
    write_tasks(tasks, path)
    assert load_tasks(path, TaskFormat.GENERIC) == tasks


def test_suite_requires_cases():
    with pytest.raises(ValueError):
        TestSuite(style=TestStyle.ASSERTION, cases=())


def test_error_message_requires_description_when_failed():
    with pytest.raises(ValueError):
        ErrorMessage(ErrorType.TYPE_ERROR, "")
    ErrorMessage(ErrorType.PASSED, "")  # fine


_text = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=40
)
_entry_strategy = st.builds(
    lambda task_id, description, buggy, error_type, message, category, cases: CodeErrorEntry(
        task=Task(
            task_id="id-" + task_id,
            description=description,
            tests=TestSuite(style=TestStyle.ASSERTION, cases=tuple(cases)),
            category=category,
        ),
        buggy_code=buggy,
        error=ErrorMessage(error_type, message),
    ),
    task_id=st.uuids().map(str),
    description=_text,
    buggy=_text,
    error_type=st.sampled_from([t for t in ErrorType if t is not ErrorType.PASSED]),
    message=_text,
    category=st.sampled_from(list(TaskCategory)),
    cases=st.lists(_text, min_size=1, max_size=4),
)


@settings(max_examples=50, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(entries=st.lists(_entry_strategy, max_size=5, unique_by=lambda e: e.task_id))
def test_round_trip_property(entries, tmp_path):
    entry_set = CodeErrorSet(tuple(entries))
    path = tmp_path / "rt.jsonl"
    write_code_error(entry_set, path)
    assert load_code_error(path) == entry_set
