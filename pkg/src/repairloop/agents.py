"""Chat-model backends, the prompt-template catalog, and the two agent roles.

The learner agent generates and repairs code; the teacher agent reads the
execution feedback and writes repair instructions (a short cause-plus-plan
text) for the learner.  Templates live as data files under ``templates/`` so
operators can diff and tune them without touching code.

The scripted backend replays a fixed response list and makes every test and
fixture in this package deterministic.  Scripted state is per-episode: build
one model per repair episode, never share one across concurrent episodes.
"""

from __future__ import annotations

import logging
import os
import re
import time
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import requests

from .corpus import Task
from .sandbox import ExecutionReport, describe_failure

log = logging.getLogger(__name__)

# Role instructions used verbatim in the shipped templates.
LEARNER_ROLE = "You are a student assistant with excellent code repair capabilities."
TEACHER_ROLE = "You are an experienced and insightful programming instructor."


class Backend(str, Enum):
    HTTP_CHAT_API = "http"
    SCRIPTED = "scripted"


class TransportError(RuntimeError):
    """The chat backend could not produce a response after bounded retries."""


class ScriptExhaustedError(TransportError):
    """A scripted backend ran out of canned responses."""


class MissingPlaceholderError(KeyError):
    def __init__(self, names: Sequence[str]):
        self.names = tuple(names)
        super().__init__(f"missing placeholder value(s): {', '.join(names)}")


@dataclass
class ChatModelConfig:
    backend: Backend = Backend.SCRIPTED
    model_name: str = "scripted"
    temperature: float = 0.2
    max_tokens: int = 512
    endpoint: str = ""
    api_key_env: str = "CHAT_API_KEY"
    script: tuple[str, ...] = ()
    max_attempts: int = 3
    backoff_s: float = 1.0

    def __post_init__(self):
        self.backend = Backend(self.backend)
        self.script = tuple(self.script)
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be > 0")
        if self.backend is Backend.HTTP_CHAT_API and not self.endpoint:
            raise ValueError("http backend requires an endpoint")


@dataclass(frozen=True)
class ModelResponse:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0


class ChatModel:
    """A configured chat backend with per-run call accounting."""

    def __init__(self, config: ChatModelConfig):
        self.config = config
        self.calls = 0
        self._cursor = 0

    def generate(self, messages: list[dict[str, str]]) -> ModelResponse:
        self.calls += 1
        if self.config.backend is Backend.SCRIPTED:
            return self._scripted(messages)
        return self._http(messages)

    def _scripted(self, messages: list[dict[str, str]]) -> ModelResponse:
        if self._cursor >= len(self.config.script):
            raise ScriptExhaustedError(
                f"script exhausted after {len(self.config.script)} responses"
            )
        text = self.config.script[self._cursor]
        self._cursor += 1
        if log.isEnabledFor(logging.DEBUG):
            user = next((m["content"] for m in messages if m["role"] == "user"), "")
            log.debug("scripted response %d for prompt: %s", self._cursor, user[:400])
        return ModelResponse(text=text)

    def _http(self, messages: list[dict[str, str]]) -> ModelResponse:
        payload = {
            "model": self.config.model_name,
            "messages": messages,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.config.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"

        last_error: Exception | None = None
        for attempt in range(self.config.max_attempts):
            if attempt:
                time.sleep(self.config.backoff_s * 2 ** (attempt - 1))
            try:
                response = requests.post(
                    self.config.endpoint, json=payload, headers=headers, timeout=120
                )
                response.raise_for_status()
                body = response.json()
                choice = body["choices"][0]["message"]["content"]
                usage = body.get("usage", {})
                return ModelResponse(
                    text=choice,
                    prompt_tokens=int(usage.get("prompt_tokens", 0)),
                    completion_tokens=int(usage.get("completion_tokens", 0)),
                )
            except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
                last_error = exc
                log.warning("chat request attempt %d/%d failed: %s",
                            attempt + 1, self.config.max_attempts, exc)
        raise TransportError(f"chat backend failed after "
                             f"{self.config.max_attempts} attempts: {last_error}")


def build_model(config: ChatModelConfig) -> ChatModel:
    return ChatModel(config)


class PromptMode(str, Enum):
    ZERO_SHOT = "zero-shot"
    ZERO_SHOT_COT = "zero-shot-cot"
    FEW_SHOT = "few-shot"
    FEW_SHOT_COT = "few-shot-cot"
    REPAIR_ZERO_SHOT = "repair-zero-shot"
    REPAIR_FEW_SHOT = "repair-few-shot"
    REPAIR_COT = "repair-cot"
    SELF_REFINE_PLAN = "self-refine-plan"
    SELF_REFINE_APPLY = "self-refine-apply"
    ERROR_MSGS_REPAIR = "error-msgs-repair"
    TEACHER_COR = "teacher-cor"
    LEARNER_APPLY_COR = "learner-apply-cor"


PLACEHOLDER_NAMES = ("description", "code", "error_message", "cor", "examples")
_PLACEHOLDER_RE = re.compile(r"\{(" + "|".join(PLACEHOLDER_NAMES) + r")\}")


@dataclass(frozen=True)
class PromptTemplate:
    mode: PromptMode
    system_text: str
    user_text: str

    def placeholders(self) -> set[str]:
        return set(_PLACEHOLDER_RE.findall(self.system_text)) | \
            set(_PLACEHOLDER_RE.findall(self.user_text))


def render_prompt(template: PromptTemplate, context: Mapping[str, str]) -> list[dict[str, str]]:
    """Render a template into chat messages by byte-exact substitution.

    Substitution is single-pass, so placeholder-looking text inside supplied
    values stays literal.  A placeholder referenced by the template but
    absent from ``context`` raises ``MissingPlaceholderError`` naming it.
    """
    needed = template.placeholders()
    missing = sorted(name for name in needed if name not in context)
    if missing:
        raise MissingPlaceholderError(missing)

    def substitute(text: str) -> str:
        return _PLACEHOLDER_RE.sub(lambda m: str(context[m.group(1)]), text)

    return [
        {"role": "system", "content": substitute(template.system_text)},
        {"role": "user", "content": substitute(template.user_text)},
    ]


def _default_template_root():
    return resources.files(__package__) / "templates"


def _parse_template_file(mode: PromptMode, text: str) -> PromptTemplate:
    sections: dict[str, list[str]] = {}
    current: list[str] | None = None
    for line in text.splitlines():
        tag = line.strip().lower()
        if tag in ("[system]", "[user]"):
            current = sections.setdefault(tag[1:-1], [])
            continue
        if current is not None:
            current.append(line)
    if "user" not in sections:
        raise ValueError(f"template {mode.value} has no [user] section")
    system = "\n".join(sections.get("system", [])).strip()
    user = "\n".join(sections["user"]).strip()
    return PromptTemplate(mode=mode, system_text=system, user_text=user)


def load_templates(template_dir: str | Path | None = None) -> dict[PromptMode, PromptTemplate]:
    """Load the full template catalog from a directory (default: packaged)."""
    templates: dict[PromptMode, PromptTemplate] = {}
    for mode in PromptMode:
        name = f"{mode.value}.txt"
        if template_dir is not None:
            text = (Path(template_dir) / name).read_text(encoding="utf-8")
        else:
            text = (_default_template_root() / name).read_text(encoding="utf-8")
        templates[mode] = _parse_template_file(mode, text)
    return templates


def load_exemplars(kind: str, template_dir: str | Path | None = None) -> str:
    """Read the few-shot exemplar block; ``kind`` is "generation" or "repair"."""
    name = f"examples-{kind}.txt"
    if template_dir is not None:
        return (Path(template_dir) / name).read_text(encoding="utf-8").strip()
    return (_default_template_root() / name).read_text(encoding="utf-8").strip()


_CODE_FENCE_RE = re.compile(r"```([^\n`]*)\n(.*?)```", re.DOTALL)
_LANG_ALIASES = {"py": "python", "python3": "python", "js": "javascript"}


def _normalize_lang(tag: str) -> str:
    tag = tag.strip().split()[0].lower() if tag.strip() else ""
    return _LANG_ALIASES.get(tag, tag)


def extract_code(response: str, language: str = "python") -> str:
    """Pull source code out of a model response.

    Returns the first fenced block whose info string matches the language
    tag, else the first fenced block, else the whole response trimmed.
    Idempotent on its own output for code whose first line starts at
    column zero.
    """
    blocks = _CODE_FENCE_RE.findall(response)
    if blocks:
        target = _normalize_lang(language)
        for info, body in blocks:
            if _normalize_lang(info) == target:
                return body.strip("\n")
        return blocks[0][1].strip("\n")
    return response.strip()


@dataclass(frozen=True)
class CoRText:
    """Teacher output: why the bug occurs and how to fix it.

    When no plan marker can be found, ``reason`` and ``plan`` both fall back
    to the raw response; downstream code only relies on ``raw``.
    """

    raw: str
    reason: str = ""
    plan: str = ""

    def __post_init__(self):
        if not self.raw:
            raise ValueError("raw teacher response must be non-empty")


_PLAN_MARKER_RE = re.compile(r"(?is)\b(?:fix|plan|solution|repair)\s*:")
_REASON_LABEL_RE = re.compile(r"(?is)^\s*(?:reason|why|cause)\s*:\s*")


def split_cor(raw: str) -> CoRText:
    """Best-effort split of a teacher response into reason and plan."""
    raw = raw.strip() or "(empty teacher response)"
    match = _PLAN_MARKER_RE.search(raw)
    if match:
        reason = _REASON_LABEL_RE.sub("", raw[: match.start()]).strip()
        plan = raw[match.end():].strip()
        if reason and plan:
            return CoRText(raw=raw, reason=reason, plan=plan)
    return CoRText(raw=raw, reason=raw, plan=raw)


def teacher_cor(model: ChatModel, task: Task, code: str, report: ExecutionReport,
                templates: Mapping[PromptMode, PromptTemplate],
                include_description: bool = True) -> CoRText:
    """Ask the teacher for repair instructions grounded in execution feedback."""
    if report.passed:
        raise ValueError("teacher_cor called on a passing report")
    context = {
        "description": task.description if include_description else "",
        "code": code,
        "error_message": describe_failure(report),
    }
    messages = render_prompt(templates[PromptMode.TEACHER_COR], context)
    response = model.generate(messages)
    return split_cor(response.text)
