from __future__ import annotations

import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from repairloop.corpus import CodeErrorSet, ErrorType
from repairloop.metrics import (
    EvalReport,
    ReportFormat,
    aggregate,
    pass_at_k,
    render_report,
)
from repairloop.repair import FinalVerdict, RepairMode, Trajectory

from .conftest import make_entry


def enumeration_oracle(n: int, c: int, k: int) -> float:
    """Exhaustive subset enumeration: fraction of k-subsets hitting a success.

    Samples are indices 0..n-1 with the first c marked correct.  Independent
    of the product-form implementation under test.
    """
    subsets = list(itertools.combinations(range(n), k))
    hits = sum(1 for subset in subsets if any(i < c for i in subset))
    return hits / len(subsets)


def make_trajectory(task_id: str, passed: bool, repair_turns: int = 0,
                    model_calls: int = 0) -> Trajectory:
    return Trajectory(
        task_id=task_id,
        mode=RepairMode.COR,
        turns=(),
        final_verdict=FinalVerdict.PASSED if passed else FinalVerdict.UNRESOLVED,
        repair_turns=repair_turns,
        model_calls=model_calls,
        wall_time=0.0,
        include_generation=False,
    )


def test_all_correct_is_one():
    assert pass_at_k(5, 5, 1) == 1.0


def test_none_correct_is_zero():
    assert pass_at_k(5, 0, 1) == 0.0


def test_two_of_five_at_one():
    # Brute force: 5 single draws, 2 succeed.
    assert pass_at_k(5, 2, 1) == pytest.approx(0.4, abs=1e-15)


def test_matches_enumeration_for_10_3_5():
    assert pass_at_k(10, 3, 5) == pytest.approx(enumeration_oracle(10, 3, 5), abs=1e-12)


def test_exact_one_when_not_enough_failures():
    for n in range(1, 8):
        for c in range(1, n + 1):
            for k in range(n - c + 1, n + 1):
                assert pass_at_k(n, c, k) == 1.0


def test_domain_violations_raise():
    with pytest.raises(ValueError):
        pass_at_k(5, 6, 1)
    with pytest.raises(ValueError):
        pass_at_k(5, -1, 1)
    with pytest.raises(ValueError):
        pass_at_k(5, 2, 0)
    with pytest.raises(ValueError):
        pass_at_k(5, 2, 6)


@given(st.integers(1, 10).flatmap(
    lambda n: st.tuples(st.just(n), st.integers(0, n), st.integers(1, n))
))
def test_matches_enumeration_everywhere(ncx):
    n, c, k = ncx
    assert pass_at_k(n, c, k) == pytest.approx(enumeration_oracle(n, c, k), abs=1e-12)


@given(st.integers(2, 10).flatmap(
    lambda n: st.tuples(st.just(n), st.integers(0, n - 1), st.integers(1, n - 1))
))
def test_monotone_in_c_and_k(ncx):
    n, c, k = ncx
    assert pass_at_k(n, c + 1, k) >= pass_at_k(n, c, k)
    assert pass_at_k(n, c, k + 1) >= pass_at_k(n, c, k)


@given(st.integers(1, 10).flatmap(
    lambda n: st.tuples(st.just(n), st.integers(1, n))
))
def test_k_equals_n_is_one_for_any_success(nc):
    n, c = nc
    assert pass_at_k(n, c, n) == 1.0


def test_aggregate_pass_fraction():
    trajectories = [make_trajectory(f"t/{i}", passed=i < 3) for i in range(4)]
    report = aggregate(trajectories)
    assert report.pass_at[1] == pytest.approx(0.75)
    assert report.trajectories == 4


def test_aggregate_multiple_samples_per_task():
    trajectories = [
        make_trajectory("t/0", True), make_trajectory("t/0", False),
        make_trajectory("t/1", False), make_trajectory("t/1", False),
    ]
    report = aggregate(trajectories)
    # task t/0: n=2, c=1 -> 0.5; task t/1: 0.0; mean 0.25
    assert report.pass_at[1] == pytest.approx(0.25)


def test_aggregate_repaired_by_type():
    entries = CodeErrorSet((
        make_entry("t/0", error_type=ErrorType.ASSERTION_ERROR),
        make_entry("t/1", error_type=ErrorType.ASSERTION_ERROR),
    ))
    trajectories = [make_trajectory("t/0", True, 1), make_trajectory("t/1", False, 2)]
    report = aggregate(trajectories, entries)
    assert report.repaired_by_type[ErrorType.ASSERTION_ERROR] == (1, 2)
    assert sum(n for _, n in report.repaired_by_type.values()) == len(entries)


def test_aggregate_orphans_rejected():
    entries = CodeErrorSet((make_entry("t/0"), make_entry("t/other")))
    trajectories = [make_trajectory("t/0", True), make_trajectory("t/1", False)]
    with pytest.raises(ValueError) as exc:
        aggregate(trajectories, entries)
    assert "t/other" in str(exc.value) and "t/1" in str(exc.value)


def test_per_turn_pass_counts_budgets():
    trajectories = [
        make_trajectory("t/0", True, repair_turns=0),
        make_trajectory("t/1", True, repair_turns=2),
        make_trajectory("t/2", False, repair_turns=3),
        make_trajectory("t/3", True, repair_turns=1),
    ]
    report = aggregate(trajectories)
    assert report.per_turn_pass == (0.25, 0.5, 0.75, 0.75)
    assert all(a <= b for a, b in zip(report.per_turn_pass, report.per_turn_pass[1:]))
    assert report.per_turn_pass[-1] <= report.pass_at[1] + 1e-12


def test_per_turn_pass_matches_hand_replay_of_scripted_episodes():
    # Three scripted episodes, hand-replayed: task a passes at generation,
    # task b fails twice then passes at repair turn 2, task c never passes
    # and stops at the 3-turn limit.  Expected curve over turn budgets
    # 0..3: [1/3, 1/3, 2/3, 2/3].
    from repairloop.agents import load_templates
    from repairloop.repair import RepairConfig, run_episode

    from .conftest import fake_execute, make_task, scripted

    templates = load_templates()
    plans = {
        "a": ["```python\n# PASS\n```"],
        "b": ["```python\n# FAIL\n```"] * 2 + ["```python\n# PASS\n```"],
        "c": ["```python\n# FAIL\n```"] * 4,
    }
    trajectories = []
    for task_id, responses in plans.items():
        config = RepairConfig(
            learner=scripted(*responses),
            teacher=None,
            mode=RepairMode.ERROR_MSGS,
            include_generation=True,
            max_turns=3,
        )
        trajectories.append(run_episode(make_task(task_id), config,
                                        execute=fake_execute, templates=templates))
    report = aggregate(trajectories)
    assert report.per_turn_pass == pytest.approx((1 / 3, 1 / 3, 2 / 3, 2 / 3))


def test_aggregate_requires_trajectories():
    with pytest.raises(ValueError):
        aggregate([])


def test_json_round_trip():
    trajectories = [make_trajectory("t/0", True, 1, model_calls=3)]
    entries = CodeErrorSet((make_entry("t/0"),))
    report = aggregate(trajectories, entries)
    parsed = EvalReport.from_dict(__import__("json").loads(
        render_report(report, ReportFormat.JSON)))
    assert parsed == report


def test_csv_row_count_is_types_plus_header():
    entries = CodeErrorSet((
        make_entry("t/0", error_type=ErrorType.ASSERTION_ERROR),
        make_entry("t/1", error_type=ErrorType.TYPE_ERROR),
    ))
    trajectories = [make_trajectory("t/0", True), make_trajectory("t/1", False)]
    report = aggregate(trajectories, entries)
    rows = render_report(report, ReportFormat.CSV).strip().splitlines()
    assert len(rows) == 2 + 1


def test_csv_empty_table_is_header_only():
    report = aggregate([make_trajectory("t/0", True)])
    rows = render_report(report, ReportFormat.CSV).strip().splitlines()
    assert rows == ["error_type,repaired,total"]


def test_text_render_is_stable():
    report = aggregate([make_trajectory("t/0", True, model_calls=2)])
    assert render_report(report) == render_report(report)
    assert "pass@1" in render_report(report)
