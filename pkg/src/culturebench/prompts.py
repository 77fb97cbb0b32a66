"""Prompt templates: editable text files with {name} placeholders.

Only simple lowercase identifiers in braces are treated as placeholders, so
literal JSON examples inside a template ({"knowledge1": "xxx"}) pass through
untouched.
"""

from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources
from pathlib import Path

_PLACEHOLDER_RE = re.compile(r"\{([a-z][a-z0-9_]*)\}")

TEMPLATE_NAMES = (
    "expand_taxonomy",
    "keyword_relevance",
    "cultural_classify",
    "extract_differential",
    "extract_unique",
    "question_differential",
    "question_unique",
    "answer_generation",
    "judge_pairwise",
    "translate_keyword",
)


class PromptError(ValueError):
    """Unknown template or missing placeholder value."""


_default_prompt_dir: Path | None = None


def set_default_prompt_dir(path: Path | str | None) -> None:
    """Process-wide override directory; individual calls may still pass their own."""
    global _default_prompt_dir
    _default_prompt_dir = Path(path) if path else None


@lru_cache(maxsize=None)
def _bundled(name: str) -> str:
    if name not in TEMPLATE_NAMES:
        raise PromptError(f"unknown prompt template {name!r}")
    return resources.files("culturebench.data.prompts").joinpath(f"{name}.txt").read_text(encoding="utf-8")


def load_template(name: str, prompt_dir: Path | str | None = None) -> str:
    """Loads a template, preferring an override file in prompt_dir when present."""
    directory = prompt_dir if prompt_dir is not None else _default_prompt_dir
    if directory is not None:
        override = Path(directory) / f"{name}.txt"
        if override.exists():
            return override.read_text(encoding="utf-8")
    return _bundled(name)


def placeholders(template: str) -> set[str]:
    return set(_PLACEHOLDER_RE.findall(template))


def render(template: str, **values: str) -> str:
    """Substitutes every placeholder; raises if the template needs a value not given."""
    missing = placeholders(template) - set(values)
    if missing:
        raise PromptError(f"missing placeholder values: {sorted(missing)}")

    def _sub(match: re.Match[str]) -> str:
        return str(values[match.group(1)])

    return _PLACEHOLDER_RE.sub(_sub, template)


def render_named(name: str, prompt_dir: Path | str | None = None, **values: str) -> str:
    return render(load_template(name, prompt_dir), **values)
