"""Country-specific taxonomy expansion: one role-playing prompt per (primary, secondary).

The parser accepts the response shapes real models produce: numbered lists,
markdown bullets, and two-column "topic: keywords" lines, with an optional
"Keywords:" continuation line under a bare header.
"""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .core import PrimaryTopic, Taxonomy, TertiaryTopic, UnknownTopic, language
from .gateway import ChatRequest, LlmGateway
from .prompts import render_named

logger = logging.getLogger(__name__)

EXPANSION_TEMPERATURE = 0.7
EXPANSION_MAX_TOKENS = 2048
PROMPTED_MIN_TOPICS = 5  # asked of the model, never enforced at parse time

_NONE_MARKER = re.compile(r"^[\s\"'`*]*none[\s.。!！\"'`*]*$", re.IGNORECASE)
_ENUM_PREFIX = re.compile(r"^\s*(?:\d+\s*[.)、．]|[-*•·])\s+")
_KEYWORD_LABEL = re.compile(r"^\s*\**(?:keywords?|キーワード|关键词|관련 키워드)\**\s*[:：]\s*(.*)$", re.IGNORECASE)
_SEPARATOR = re.compile(r"\s*(?:[:：]|—|–|\s-\s)\s*")
_KEYWORD_SPLIT = re.compile(r"[,、，;；]")
_EMPHASIS = re.compile(r"[*_#]+")


@dataclass(frozen=True)
class ExpansionResult:
    source: tuple[str, str, str]  # (primary_abbrev, secondary, language)
    outcome: str  # "none_marker" | "topics" | "parse_failure"
    topics: tuple[TertiaryTopic, ...] = ()
    raw: str | None = None

    @classmethod
    def none_marker(cls, source) -> "ExpansionResult":
        return cls(source=source, outcome="none_marker")

    @classmethod
    def parsed(cls, source, topics) -> "ExpansionResult":
        return cls(source=source, outcome="topics", topics=tuple(topics))

    @classmethod
    def parse_failure(cls, source, raw: str) -> "ExpansionResult":
        return cls(source=source, outcome="parse_failure", raw=raw)


def render_expansion_prompt(taxonomy: Taxonomy, primary: PrimaryTopic, secondary: str, country: str) -> str:
    if not taxonomy.has_secondary(primary.abbrev, secondary):
        raise UnknownTopic(f"secondary {secondary!r} does not belong to primary {primary.abbrev!r}")
    return render_named(
        "expand_taxonomy",
        primary_topics=primary.name,
        secondary_topics=secondary,
        country=country,
    )


def _clean_name(text: str) -> str:
    return _EMPHASIS.sub("", text).strip().strip("\"'“”「」『』").strip().rstrip(":：").strip()


def _split_keywords(text: str) -> list[str]:
    seen: set[str] = set()
    keywords: list[str] = []
    for raw in _KEYWORD_SPLIT.split(text):
        kw = _clean_name(raw).strip("()（）")
        if kw and kw.lower() not in seen:
            seen.add(kw.lower())
            keywords.append(kw)
    return keywords


def parse_expansion(response: str, source: tuple[str, str, str]) -> ExpansionResult:
    """Turns a model response into tertiary topics; failures are data, not errors."""
    text = (response or "").strip()
    if _NONE_MARKER.match(text):
        return ExpansionResult.none_marker(source)

    primary_abbrev, secondary, lang_code = source
    parsed: dict[str, list[str]] = {}
    order: list[str] = []
    pending: str | None = None

    for line in text.splitlines():
        if not line.strip():
            continue
        label = _KEYWORD_LABEL.match(line)
        if label:
            target = pending or (order[-1] if order else None)
            keywords = _split_keywords(label.group(1))
            if target and keywords:
                _merge(parsed, order, target, keywords)
            pending = None
            continue
        enum = _ENUM_PREFIX.match(line)
        body = line[enum.end():] if enum else line
        parts = _SEPARATOR.split(body, maxsplit=1)
        if len(parts) == 2 and parts[1].strip():
            name = _clean_name(parts[0])
            keywords = _split_keywords(parts[1])
            if name and keywords:
                _merge(parsed, order, name, keywords)
                pending = None
                continue
        if enum:
            name = _clean_name(body)
            pending = name or None

    if not parsed:
        return ExpansionResult.parse_failure(source, response)

    topics = tuple(
        TertiaryTopic(name=name, keywords=tuple(parsed[name]), language=lang_code, parent=(primary_abbrev, secondary))
        for name in order
    )
    if len(topics) < PROMPTED_MIN_TOPICS:
        logger.info("expansion for %s/%s [%s] returned only %d topics", primary_abbrev, secondary, lang_code, len(topics))
    return ExpansionResult.parsed(source, topics)


def _merge(parsed: dict[str, list[str]], order: list[str], name: str, keywords: list[str]) -> None:
    if name not in parsed:
        parsed[name] = []
        order.append(name)
    existing = {k.lower() for k in parsed[name]}
    parsed[name].extend(k for k in keywords if k.lower() not in existing)


def expand_all(
    taxonomy: Taxonomy,
    lang_code: str,
    gateway: LlmGateway,
    model: str,
    concurrency: int = 4,
    failure_log: Path | str | None = None,
) -> Taxonomy:
    """One expansion call per (primary, secondary); merged in taxonomy order.

    Parse failures are appended to the sidecar log and their cells left absent.
    """
    lang = language(lang_code)
    primaries = {p.abbrev: p for p in taxonomy.primaries}

    def _one(abbrev: str, secondary: str) -> ExpansionResult:
        source = (abbrev, secondary, lang_code)
        prompt = render_expansion_prompt(taxonomy, primaries[abbrev], secondary, lang.country)
        resp = gateway.complete(
            ChatRequest.user(
                model,
                prompt,
                temperature=EXPANSION_TEMPERATURE,
                max_tokens=EXPANSION_MAX_TOKENS,
                tag=f"expand:{lang_code}:{abbrev}/{secondary}",
            )
        )
        return parse_expansion(resp.content, source)

    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        futures = [(abbrev, secondary, pool.submit(_one, abbrev, secondary)) for abbrev, secondary in taxonomy.secondaries]
        results = [(abbrev, secondary, fut.result()) for abbrev, secondary, fut in futures]

    failures: list[dict] = []
    for abbrev, secondary, result in results:  # taxonomy order, not completion order
        if result.outcome == "topics":
            taxonomy.set_cell(lang_code, abbrev, secondary, list(result.topics))
        elif result.outcome == "parse_failure":
            failures.append({"source": list(result.source), "raw": result.raw, "reason": "unparseable expansion"})

    if failures and failure_log is not None:
        with open(failure_log, "a", encoding="utf-8") as fh:
            for failure in failures:
                fh.write(json.dumps(failure, ensure_ascii=False) + "\n")
    if failures:
        logger.warning("%d of %d expansions unparseable for %s", len(failures), len(results), lang_code)
    return taxonomy
