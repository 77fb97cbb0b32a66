"""Knowledge-point extraction from classified pages, with tolerant JSON recovery.

Each qualifying page yields at most 3 points: differential points pair a
local fact with a cross-country contrast; unique points carry the fact alone.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .core import language
from .gateway import ChatRequest, LlmGateway
from .prompts import render_named

logger = logging.getLogger(__name__)

MAX_POINTS_PER_PAGE = 3
EXTRACTION_TEMPERATURE = 0.7
EXTRACTION_MAX_TOKENS = 1024

_KNOWLEDGE_KEY = re.compile(r"^knowledge\d*$", re.IGNORECASE)
_DIFFER_KEY = re.compile(r"^differ\d*$", re.IGNORECASE)
_FENCE = re.compile(r"```[a-zA-Z0-9_-]*[ \t]*\n?(.*?)```", re.DOTALL)
_TRAILING_COMMA = re.compile(r",(\s*[}\]])")


class NotRecoverable(ValueError):
    """No JSON value could be pulled out of the text."""


class ExtractionUnparseable(ValueError):
    """The extraction response held no recoverable JSON; the page is skipped."""

    def __init__(self, reason: str, raw: str):
        super().__init__(reason)
        self.raw = raw


def _escape_controls_in_strings(text: str) -> str:
    """Escapes raw newlines/tabs that models leave inside JSON string literals."""
    out: list[str] = []
    in_string = False
    escaped = False
    for ch in text:
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            elif ch == "\n":
                out.append("\\n")
                continue
            elif ch == "\t":
                out.append("\\t")
                continue
            elif ch == "\r":
                continue
        elif ch == '"':
            in_string = True
        out.append(ch)
    return "".join(out)


def _scan_for_value(text: str) -> Any:
    decoder = json.JSONDecoder()
    for i, ch in enumerate(text):
        if ch not in "[{":
            continue
        for candidate in (text[i:], _escape_controls_in_strings(_TRAILING_COMMA.sub(r"\1", text[i:]))):
            try:
                value, _ = decoder.raw_decode(candidate)
                return value
            except json.JSONDecodeError:
                continue
    raise NotRecoverable("no JSON value found")


def recover_json(text: str) -> Any:
    """Parses model output into a JSON value, shrugging off fences, prose, and sloppy commas.

    Valid JSON parses exactly as the standard parser would.
    """
    if text is None or not text.strip():
        raise NotRecoverable("empty text")
    candidates = [text]
    candidates.extend(m.group(1) for m in _FENCE.finditer(text))
    for candidate in candidates:
        try:
            return json.loads(candidate)
        except json.JSONDecodeError:
            pass
    for candidate in candidates:
        try:
            return _scan_for_value(candidate)
        except NotRecoverable:
            continue
    raise NotRecoverable("no JSON value found")


@dataclass(frozen=True)
class KnowledgePoint:
    kind: str  # "differential" | "unique"
    knowledge: str
    differ: str | None
    page_title: str
    page_url: str
    keyword: str
    topic_path: tuple[str, str, str]
    language: str
    index: int  # 1..3, dense per page

    def knowledge_text(self) -> str:
        """The text handed to downstream prompts; differential points carry both halves."""
        if self.kind == "differential" and self.differ:
            return f"{self.knowledge}\n{self.differ}"
        return self.knowledge

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "knowledge": self.knowledge,
            "differ": self.differ,
            "page_title": self.page_title,
            "page_url": self.page_url,
            "keyword": self.keyword,
            "topic_path": list(self.topic_path),
            "language": self.language,
            "index": self.index,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "KnowledgePoint":
        return cls(
            kind=data["kind"],
            knowledge=data["knowledge"],
            differ=data.get("differ"),
            page_title=data["page_title"],
            page_url=data["page_url"],
            keyword=data["keyword"],
            topic_path=tuple(data["topic_path"]),
            language=data["language"],
            index=int(data["index"]),
        )


def _as_item_list(value: Any) -> list[dict]:
    if isinstance(value, dict):
        return [value]
    if isinstance(value, list):
        return [item for item in value if isinstance(item, dict)]
    return []


def _field(item: dict, pattern: re.Pattern[str]) -> str | None:
    for key in sorted(item):
        if pattern.match(key) and isinstance(item[key], str) and item[key].strip():
            return item[key].strip()
    return None


def _points_from_items(
    items: list[dict], kind: str, page: "object", require_differ: bool
) -> list[KnowledgePoint]:
    points: list[KnowledgePoint] = []
    for item in items:
        knowledge = _field(item, _KNOWLEDGE_KEY)
        differ = _field(item, _DIFFER_KEY) if require_differ else None
        if not knowledge or (require_differ and not differ):
            logger.warning("dropping %s item missing fields: %s", kind, sorted(item))
            continue
        points.append(
            KnowledgePoint(
                kind=kind,
                knowledge=knowledge,
                differ=differ,
                page_title=page.title,
                page_url=page.url,
                keyword=page.keyword,
                topic_path=page.topic_path,
                language=page.language,
                index=len(points) + 1,
            )
        )
        if len(points) == MAX_POINTS_PER_PAGE:
            if len(items) > MAX_POINTS_PER_PAGE:
                logger.warning("page %r returned %d items; keeping first %d", page.title, len(items), MAX_POINTS_PER_PAGE)
            break
    return points


def _run_extraction_prompt(
    template: str, page, country: str, lang_name: str, gateway: LlmGateway, model: str, tag: str
) -> Any:
    prompt = render_named(
        template,
        target_language=lang_name,
        country=country,
        title=page.title,
        content=page.content,
    )
    resp = gateway.complete(
        ChatRequest.user(
            model,
            prompt,
            temperature=EXTRACTION_TEMPERATURE,
            max_tokens=EXTRACTION_MAX_TOKENS,
            tag=tag,
        )
    )
    if not resp.content.strip():
        raise ExtractionUnparseable("empty extraction response", resp.content)
    try:
        return recover_json(resp.content)
    except NotRecoverable as exc:
        raise ExtractionUnparseable(str(exc), resp.content) from exc


def extract_differential(page, country: str, lang_code: str, gateway: LlmGateway, model: str) -> list[KnowledgePoint]:
    """Extracts up to 3 (knowledge, contrast) pairs from a Differential-classified page."""
    value = _run_extraction_prompt(
        "extract_differential", page, country, language(lang_code).name, gateway, model,
        tag=f"extract-differential:{page.keyword}",
    )
    return _points_from_items(_as_item_list(value), "differential", page, require_differ=True)


def extract_unique(page, country: str, lang_code: str, gateway: LlmGateway, model: str) -> list[KnowledgePoint]:
    """Extracts up to 3 country-unique fragments from a Unique-classified page."""
    value = _run_extraction_prompt(
        "extract_unique", page, country, language(lang_code).name, gateway, model,
        tag=f"extract-unique:{page.keyword}",
    )
    return _points_from_items(_as_item_list(value), "unique", page, require_differ=False)


def run_extraction(
    page_records: list,
    gateway: LlmGateway,
    model: str,
    concurrency: int = 8,
    failure_log: Path | str | None = None,
) -> tuple[list[KnowledgePoint], dict[str, int]]:
    """Per-page extraction with bounded parallelism; failures never abort the run."""
    from concurrent.futures import ThreadPoolExecutor

    failures: list[dict] = []

    def _one(record) -> list[KnowledgePoint]:
        country = language(record.language).country
        try:
            if record.classification == "Differential":
                return extract_differential(record, country, record.language, gateway, model)
            return extract_unique(record, country, record.language, gateway, model)
        except ExtractionUnparseable as exc:
            failures.append({
                "page_ref": {"title": record.title, "url": record.url},
                "raw": exc.raw,
                "reason": str(exc),
            })
            return []

    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        results = list(pool.map(_one, page_records))

    points = [point for batch in results for point in batch]
    counts = {
        "pages": len(page_records),
        "knowledge_points": len(points),
        "pages_failed": len(failures),
        "differential_points": sum(1 for p in points if p.kind == "differential"),
        "unique_points": sum(1 for p in points if p.kind == "unique"),
    }
    if failures:
        logger.warning("extraction quality counter: %d of %d pages unparseable", len(failures), len(page_records))
        if failure_log is not None:
            with open(failure_log, "a", encoding="utf-8") as fh:
                for failure in failures:
                    fh.write(json.dumps(failure, ensure_ascii=False) + "\n")
    return points, counts


def write_points(points: list[KnowledgePoint], path: Path | str) -> int:
    with open(path, "w", encoding="utf-8") as fh:
        for point in points:
            fh.write(json.dumps(point.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")
    return len(points)


def read_points(path: Path | str) -> list[KnowledgePoint]:
    points = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                points.append(KnowledgePoint.from_dict(json.loads(line)))
    return points
