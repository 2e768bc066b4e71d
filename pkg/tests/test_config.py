from __future__ import annotations

import json

import pytest

from repairloop.agents import Backend, PromptMode
from repairloop.config import ConfigError, EngineConfig, load_engine_config
from repairloop.repair import RepairMode


def write(tmp_path, data) -> str:
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def test_defaults_without_file():
    config = load_engine_config(None)
    assert config.learner.temperature == 0.2
    assert config.learner.max_tokens == 512
    assert config.repair.max_turns == 5
    assert config.limits.timeout_s == 10.0


def test_full_config_round(tmp_path):
    path = write(tmp_path, {
        "learner": {"backend": "scripted", "script": ["a"], "temperature": 0.0},
        "teacher": {"backend": "scripted", "script": ["b"]},
        "runner": {"command": "python3 -I {file}", "file_extension": ".py"},
        "limits": {"timeout_s": 3, "max_output_bytes": 1024},
        "repair": {"max_turns": 2, "mode": "error-msgs", "generation_mode": "few-shot"},
        "output_dir": "out",
        "parallelism": 4,
    })
    config = load_engine_config(path)
    assert config.learner.backend is Backend.SCRIPTED
    assert config.learner.temperature == 0.0
    assert config.runner.command == ("python3", "-I", "{file}")
    assert config.limits.timeout_s == 3
    assert config.repair.mode is RepairMode.ERROR_MSGS
    assert config.repair.generation_mode is PromptMode.FEW_SHOT
    assert config.parallelism == 4


def test_unknown_top_level_key(tmp_path):
    path = write(tmp_path, {"lerner": {}})
    with pytest.raises(ConfigError, match="lerner"):
        load_engine_config(path)


def test_unknown_nested_key(tmp_path):
    path = write(tmp_path, {"limits": {"timeout": 3}})
    with pytest.raises(ConfigError, match="timeout"):
        load_engine_config(path)


def test_invalid_values_rejected_before_work(tmp_path):
    path = write(tmp_path, {"learner": {"temperature": -1}})
    with pytest.raises(ConfigError, match="temperature"):
        load_engine_config(path)
    path = write(tmp_path, {"parallelism": 0})
    with pytest.raises(ConfigError, match="parallelism"):
        load_engine_config(path)


def test_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_engine_config(tmp_path / "nope.json")


def test_repair_config_flag_overrides(tmp_path):
    path = write(tmp_path, {
        "learner": {"backend": "scripted", "script": ["a"]},
        "repair": {"max_turns": 5, "mode": "cor"},
    })
    config = load_engine_config(path)
    repair = config.repair_config(mode=RepairMode.ERROR_MSGS, max_turns=1)
    assert repair.mode is RepairMode.ERROR_MSGS
    assert repair.max_turns == 1


def test_cor_without_teacher_reuses_learner(tmp_path):
    path = write(tmp_path, {"learner": {"backend": "scripted", "script": ["a"]}})
    config = load_engine_config(path)
    repair = config.repair_config()
    assert repair.teacher == config.learner


def test_engine_defaults_match_documented_values():
    config = EngineConfig()
    assert config.learner.temperature == 0.2
    assert config.learner.max_tokens == 512
    assert config.repair.max_turns == 5
