#!/usr/bin/env python3
"""End-to-end demo on scripted agents: no credentials, no network.

Builds a tiny repair benchmark in a temp directory, runs the two-agent
repair loop over it, and prints the manifest and evaluation report.
"""

from __future__ import annotations

import json
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from repairloop.agents import Backend, ChatModelConfig
from repairloop.corpus import (
    CodeErrorEntry,
    CodeErrorSet,
    ErrorMessage,
    ErrorType,
    Task,
    TestStyle,
    TestSuite,
    write_code_error,
)
from repairloop.metrics import aggregate, render_report
from repairloop.repair import RepairConfig, RepairMode, run_batch

BUGGY = "def square(x):\n    return x + x\n"
FIXED = "def square(x):\n    return x * x\n"


def make_entry(task_id: str) -> CodeErrorEntry:
    task = Task(
        task_id=task_id,
        description="Write square(x) returning x squared.",
        tests=TestSuite(style=TestStyle.ASSERTION,
                        cases=("assert square(3) == 9", "assert square(-2) == 4")),
    )
    return CodeErrorEntry(
        task=task,
        buggy_code=BUGGY,
        error=ErrorMessage(ErrorType.ASSERTION_ERROR, "AssertionError"),
    )


def main() -> int:
    entries = CodeErrorSet((make_entry("demo/0"), make_entry("demo/1")))

    learner = ChatModelConfig(
        backend=Backend.SCRIPTED,
        script=(f"```python\n{FIXED}```",),
    )
    teacher = ChatModelConfig(
        backend=Backend.SCRIPTED,
        script=("Reason: the function doubles x instead of squaring it. "
                "Fix: return x * x.",),
    )
    config = RepairConfig(learner=learner, teacher=teacher, mode=RepairMode.COR,
                          include_generation=False, max_turns=5)

    with tempfile.TemporaryDirectory(prefix="repairloop-demo-") as tmp:
        out = Path(tmp)
        write_code_error(entries, out / "codeerror.jsonl")
        trajectories = run_batch(entries, config, out_dir=out)
        print("--- manifest ---")
        print((out / "manifest.jsonl").read_text(encoding="utf-8"), end="")
        print("--- trajectory demo/0 ---")
        from repairloop.repair import trajectory_filename

        record = json.loads(
            (out / "trajectories" / trajectory_filename("demo/0"))
            .read_text(encoding="utf-8")
        )
        turn = record["turns"][-1]
        print("teacher instructions:", turn["cor"]["raw"])
        print("final verdict:", record["final_verdict"])
        print("--- report ---")
        print(render_report(aggregate(trajectories, entries)), end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
