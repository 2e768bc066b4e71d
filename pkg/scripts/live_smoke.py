#!/usr/bin/env python3
"""Directional live check: multi-turn repair should beat no-repair.

Runs a small task slice twice against a live chat-completions endpoint,
once with zero repair turns and once with the full two-agent loop, and
prints both pass@1 numbers.  Credentials come from the environment variable
named by --api-key-env (default CHAT_API_KEY).

Usage:
    python scripts/live_smoke.py \
        --endpoint https://api.example.com/v1/chat/completions \
        --model gpt-3.5-turbo \
        --tasks humaneval.jsonl --format humaneval --limit 10
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from repairloop.agents import Backend, ChatModelConfig
from repairloop.corpus import TaskFormat, TaskSet, load_tasks
from repairloop.metrics import aggregate
from repairloop.repair import RepairConfig, RepairMode, run_batch


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--endpoint", required=True)
    parser.add_argument("--model", required=True)
    parser.add_argument("--tasks", required=True, type=Path)
    parser.add_argument("--format", choices=[f.value for f in TaskFormat],
                        default="humaneval")
    parser.add_argument("--limit", type=int, default=10)
    parser.add_argument("--max-turns", type=int, default=5)
    parser.add_argument("--parallelism", type=int, default=2)
    parser.add_argument("--api-key-env", default="CHAT_API_KEY")
    args = parser.parse_args()

    model = ChatModelConfig(
        backend=Backend.HTTP_CHAT_API,
        endpoint=args.endpoint,
        model_name=args.model,
        api_key_env=args.api_key_env,
    )
    tasks = load_tasks(args.tasks, TaskFormat(args.format))
    slice_ = TaskSet(tuple(tasks)[: args.limit])
    print(f"running {len(slice_)} tasks against {args.model}")

    no_repair = RepairConfig(learner=model, teacher=model, mode=RepairMode.COR,
                             include_generation=True, max_turns=0)
    multi_turn = RepairConfig(learner=model, teacher=model, mode=RepairMode.COR,
                              include_generation=True, max_turns=args.max_turns)

    base = aggregate(run_batch(slice_, no_repair, parallelism=args.parallelism))
    print(f"no-repair pass@1 = {base.pass_at[1]:.3f} "
          f"({base.total_model_calls} model calls)")
    looped = aggregate(run_batch(slice_, multi_turn, parallelism=args.parallelism))
    print(f"multi-turn pass@1 = {looped.pass_at[1]:.3f} "
          f"({looped.total_model_calls} model calls)")

    improved = looped.pass_at[1] >= base.pass_at[1]
    print("repair >= no-repair:", "yes" if improved else "NO")
    return 0 if improved else 1


if __name__ == "__main__":
    sys.exit(main())
