"""Engine configuration: one JSON file, fully validated before any work starts.

Unknown keys are rejected by name so typos fail fast.  Secrets never live in
the file; the chat backend reads its API key from the environment variable
named by ``api_key_env``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .agents import ChatModelConfig, PromptMode
from .repair import RepairConfig, RepairMode
from .sandbox import ExecLimits, RunnerConfig


class ConfigError(ValueError):
    pass


@dataclass
class RepairDefaults:
    max_turns: int = 5
    mode: RepairMode = RepairMode.COR
    include_generation: bool = True
    generation_mode: PromptMode = PromptMode.ZERO_SHOT
    teacher_sees_description: bool = True
    teacher_history: bool = False


@dataclass
class EngineConfig:
    learner: ChatModelConfig = field(default_factory=ChatModelConfig)
    teacher: ChatModelConfig | None = None
    runner: RunnerConfig = field(default_factory=RunnerConfig)
    limits: ExecLimits = field(default_factory=ExecLimits)
    repair: RepairDefaults = field(default_factory=RepairDefaults)
    template_dir: Path | None = None
    output_dir: Path = Path("runs")
    parallelism: int = 1

    def repair_config(self, *, mode: RepairMode | None = None,
                      max_turns: int | None = None,
                      include_generation: bool | None = None,
                      generation_mode: PromptMode | None = None) -> RepairConfig:
        """Materialize a RepairConfig, letting explicit flags win over the file."""
        resolved_mode = mode if mode is not None else self.repair.mode
        teacher = self.teacher
        if resolved_mode is RepairMode.COR and teacher is None:
            # Paired-agent mode with a single configured model: the teacher
            # reuses the learner settings.
            teacher = self.learner
        return RepairConfig(
            learner=self.learner,
            teacher=teacher,
            max_turns=max_turns if max_turns is not None else self.repair.max_turns,
            mode=resolved_mode,
            include_generation=(include_generation if include_generation is not None
                                else self.repair.include_generation),
            generation_mode=(generation_mode if generation_mode is not None
                             else self.repair.generation_mode),
            limits=self.limits,
            runner=self.runner,
            teacher_sees_description=self.repair.teacher_sees_description,
            teacher_history=self.repair.teacher_history,
            template_dir=self.template_dir,
        )


def _check_keys(data: dict, allowed: set[str], context: str) -> None:
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown config key(s) in {context}: {', '.join(unknown)}")


def _model_config(data: dict, context: str) -> ChatModelConfig:
    _check_keys(data, {"backend", "model_name", "temperature", "max_tokens", "endpoint",
                       "api_key_env", "script", "max_attempts", "backoff_s"}, context)
    try:
        return ChatModelConfig(**{k: tuple(v) if k == "script" else v for k, v in data.items()})
    except ValueError as exc:
        raise ConfigError(f"{context}: {exc}") from exc


def _runner_config(data: dict) -> RunnerConfig:
    _check_keys(data, {"command", "compile_command", "file_extension", "env_allowlist"},
                "runner")
    kwargs: dict = {}
    if "command" in data:
        kwargs["command"] = RunnerConfig.from_raw(data["command"])
    if data.get("compile_command") is not None:
        kwargs["compile_command"] = RunnerConfig.from_raw(data["compile_command"])
    if "file_extension" in data:
        kwargs["file_extension"] = str(data["file_extension"])
    if "env_allowlist" in data:
        kwargs["env_allowlist"] = tuple(str(v) for v in data["env_allowlist"])
    return RunnerConfig(**kwargs)


def _limits_config(data: dict) -> ExecLimits:
    _check_keys(data, {"timeout_s", "max_output_bytes"}, "limits")
    try:
        return ExecLimits(**data)
    except ValueError as exc:
        raise ConfigError(f"limits: {exc}") from exc


def _repair_defaults(data: dict) -> RepairDefaults:
    _check_keys(data, {"max_turns", "mode", "include_generation", "generation_mode",
                       "teacher_sees_description", "teacher_history"}, "repair")
    try:
        defaults = RepairDefaults(**data)
        defaults.mode = RepairMode(defaults.mode)
        defaults.generation_mode = PromptMode(defaults.generation_mode)
    except ValueError as exc:
        raise ConfigError(f"repair: {exc}") from exc
    if defaults.max_turns < 0:
        raise ConfigError("repair: max_turns must be >= 0")
    return defaults


def load_engine_config(path: str | Path | None) -> EngineConfig:
    """Load and validate the engine config; None yields all defaults."""
    if path is None:
        return EngineConfig()
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    _check_keys(data, {"learner", "teacher", "runner", "limits", "repair",
                       "template_dir", "output_dir", "parallelism"}, "config")

    config = EngineConfig()
    if "learner" in data:
        config.learner = _model_config(data["learner"], "learner")
    if data.get("teacher") is not None:
        config.teacher = _model_config(data["teacher"], "teacher")
    if "runner" in data:
        config.runner = _runner_config(data["runner"])
    if "limits" in data:
        config.limits = _limits_config(data["limits"])
    if "repair" in data:
        config.repair = _repair_defaults(data["repair"])
    if data.get("template_dir") is not None:
        config.template_dir = Path(data["template_dir"])
    if "output_dir" in data:
        config.output_dir = Path(data["output_dir"])
    if "parallelism" in data:
        config.parallelism = int(data["parallelism"])
        if config.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
    return config
