"""Multilingual page retrieval and the two LLM gates (keyword relevance, cultural class).

A keyword is translated into the target language, then both arms (English and
target) are searched on a pluggable encyclopedia source. Pages that fail the
relevance gate or classify as Neither never reach knowledge extraction.
"""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Protocol
from urllib.parse import quote

import httpx

from .core import Taxonomy, language, primary_topic
from .gateway import ChatRequest, LlmGateway
from .prompts import render_named

logger = logging.getLogger(__name__)

DEFAULT_PAGES_PER_ARM = 3
DEFAULT_MAX_PAGE_CHARS = 24000
FILTER_TEMPERATURE = 0.0
FILTER_MAX_TOKENS = 8
TRANSLATE_MAX_TOKENS = 64

_YES_NO = re.compile(r"^\W*(yes|no)\b", re.IGNORECASE)
_ABC = re.compile(r"^\W*(?:answer\s*[:：]?\s*)?\(?([abc])\)?(?![a-z])", re.IGNORECASE)
_DROP_SECTIONS = {
    "references", "external links", "see also", "further reading",
    "bibliography", "notes", "sources", "footnotes",
}


class SourceUnavailable(RuntimeError):
    """The page source failed after retries."""


class CulturalClass(Enum):
    DIFFERENTIAL = "Differential"
    UNIQUE = "Unique"
    NEITHER = "Neither"


@dataclass(frozen=True)
class RetrievedPage:
    title: str
    content: str
    url: str
    source_language: str  # registry code or "en"
    keyword: str
    fetched_at: str


@dataclass(frozen=True)
class PageRecord:
    """A retrieved page joined with its pipeline context and classification."""

    page: RetrievedPage
    language: str
    topic_path: tuple[str, str, str]
    translated_keyword: str
    classification: str  # CulturalClass value

    @property
    def title(self) -> str:
        return self.page.title

    @property
    def url(self) -> str:
        return self.page.url

    @property
    def content(self) -> str:
        return self.page.content

    @property
    def keyword(self) -> str:
        return self.page.keyword

    def to_dict(self) -> dict:
        return {
            "title": self.page.title,
            "content": self.page.content,
            "url": self.page.url,
            "source_language": self.page.source_language,
            "keyword": self.page.keyword,
            "fetched_at": self.page.fetched_at,
            "language": self.language,
            "topic_path": list(self.topic_path),
            "translated_keyword": self.translated_keyword,
            "classification": self.classification,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PageRecord":
        page = RetrievedPage(
            title=data["title"],
            content=data["content"],
            url=data["url"],
            source_language=data["source_language"],
            keyword=data["keyword"],
            fetched_at=data["fetched_at"],
        )
        return cls(
            page=page,
            language=data["language"],
            topic_path=tuple(data["topic_path"]),
            translated_keyword=data.get("translated_keyword", data["keyword"]),
            classification=data["classification"],
        )


class PageSource(Protocol):
    def search(self, term: str, lang_code: str, limit: int) -> list[RetrievedPage]: ...


class MediaWikiSource:
    """Live search + plain-text extracts over the MediaWiki Action API."""

    def __init__(
        self,
        user_agent: str,
        endpoint_template: str = "https://{lang}.wikipedia.org/w/api.php",
        page_url_template: str = "https://{lang}.wikipedia.org/wiki/{title}",
        timeout_s: float = 30.0,
        retries: int = 2,
        transport: httpx.BaseTransport | None = None,
    ):
        self._endpoint_template = endpoint_template
        self._page_url_template = page_url_template
        self._retries = retries
        self._client = httpx.Client(timeout=timeout_s, headers={"User-Agent": user_agent}, transport=transport)

    def _get(self, lang_code: str, params: dict) -> dict:
        endpoint = self._endpoint_template.format(lang=lang_code)
        last: Exception | None = None
        for _ in range(self._retries + 1):
            try:
                resp = self._client.get(endpoint, params={**params, "format": "json"})
                resp.raise_for_status()
                return resp.json()
            except (httpx.HTTPError, json.JSONDecodeError) as exc:
                last = exc
        raise SourceUnavailable(f"MediaWiki request failed for {endpoint}: {last}")

    def search(self, term: str, lang_code: str, limit: int) -> list[RetrievedPage]:
        found = self._get(lang_code, {"action": "query", "list": "search", "srsearch": term, "srlimit": limit})
        titles = [hit["title"] for hit in found.get("query", {}).get("search", [])][:limit]
        if not titles:
            return []
        extracted = self._get(
            lang_code,
            {
                "action": "query",
                "prop": "extracts",
                "explaintext": 1,
                "redirects": 1,
                "titles": "|".join(titles),
            },
        )
        by_title = {
            page.get("title", ""): page.get("extract", "")
            for page in extracted.get("query", {}).get("pages", {}).values()
        }
        fetched_at = datetime.now(timezone.utc).isoformat()
        pages = []
        for title in titles:
            content = by_title.get(title, "")
            if not content.strip():
                continue
            url = self._page_url_template.format(lang=lang_code, title=quote(title.replace(" ", "_")))
            pages.append(
                RetrievedPage(
                    title=title, content=content, url=url, source_language=lang_code,
                    keyword=term, fetched_at=fetched_at,
                )
            )
        return pages


class FixtureSource:
    """Directory of JSON page files {title, content, url, lang}; deterministic by filename."""

    FETCHED_AT = "1970-01-01T00:00:00+00:00"

    def __init__(self, root: Path | str):
        self.root = Path(root)
        if not self.root.is_dir():
            raise SourceUnavailable(f"fixture page directory not found: {self.root}")

    def search(self, term: str, lang_code: str, limit: int) -> list[RetrievedPage]:
        needle = term.lower()
        pages = []
        for path in sorted(self.root.glob("*.json")):
            data = json.loads(path.read_text(encoding="utf-8"))
            if data.get("lang") != lang_code:
                continue
            if needle not in data.get("title", "").lower() and needle not in data.get("content", "").lower():
                continue
            pages.append(
                RetrievedPage(
                    title=data["title"],
                    content=data["content"],
                    url=data.get("url", f"fixture://{path.name}"),
                    source_language=lang_code,
                    keyword=term,
                    fetched_at=self.FETCHED_AT,
                )
            )
            if len(pages) == limit:
                break
        return pages


def clean_page_text(text: str, max_chars: int = DEFAULT_MAX_PAGE_CHARS) -> str:
    """Keeps leading prose: trailing reference-style sections dropped, headings flattened."""
    lines = []
    for line in text.splitlines():
        heading = re.match(r"^\s*={2,}\s*(.+?)\s*={2,}\s*$", line)
        if heading:
            title = heading.group(1).strip()
            if title.lower() in _DROP_SECTIONS:
                break
            lines.append(title)
        else:
            lines.append(line)
    cleaned = re.sub(r"\n{3,}", "\n\n", "\n".join(lines)).strip()
    return cleaned[:max_chars]


def translate_keyword(keyword: str, lang_code: str, gateway: LlmGateway, model: str) -> str:
    """LLM-backed keyword translation; falls back to the original on empty output."""
    lang = language(lang_code)
    prompt = render_named("translate_keyword", keyword=keyword, language=lang.name)
    resp = gateway.complete(
        ChatRequest.user(model, prompt, temperature=0.0, max_tokens=TRANSLATE_MAX_TOKENS, tag=f"translate:{lang_code}:{keyword}")
    )
    translated = resp.content.strip().strip("\"'“”「」").strip()
    return translated or keyword


def fetch_pages(
    keyword: str,
    lang_code: str,
    source: PageSource,
    translated: str | None = None,
    pages_per_arm: int = DEFAULT_PAGES_PER_ARM,
    max_page_chars: int = DEFAULT_MAX_PAGE_CHARS,
) -> list[RetrievedPage]:
    """Up to pages_per_arm pages from each arm (target language, then English)."""
    language(lang_code)  # closed-registry check
    target_term = translated or keyword
    pages: list[RetrievedPage] = []
    for arm_lang, term in ((lang_code, target_term), ("en", keyword)):
        for page in source.search(term, arm_lang, pages_per_arm):
            content = clean_page_text(page.content, max_page_chars)
            if not content:
                continue
            pages.append(replace(page, content=content, keyword=keyword))
    return pages


def filter_keyword_relevance(page: RetrievedPage, keyword: str, gateway: LlmGateway, model: str) -> bool:
    """Yes/No gate; anything unparseable is a conservative drop."""
    prompt = render_named(
        "keyword_relevance", keyword=keyword, wikipedia_title=page.title, wikipedia_content=page.content
    )
    resp = gateway.complete(
        ChatRequest.user(model, prompt, temperature=FILTER_TEMPERATURE, max_tokens=FILTER_MAX_TOKENS, tag=f"relevance:{keyword}")
    )
    match = _YES_NO.match(resp.content.strip())
    if match is None:
        logger.warning("unparseable relevance verdict for %r: %.60r", page.title, resp.content)
        return False
    return match.group(1).lower() == "yes"


def classify_cultural_content(
    page: RetrievedPage, country: str, primary_topic_name: str, gateway: LlmGateway, model: str
) -> CulturalClass:
    """Three-way gate: A -> Differential, B -> Unique, C -> Neither."""
    prompt = render_named(
        "cultural_classify", primary_topic=primary_topic_name, country=country, title=page.title, content=page.content
    )
    resp = gateway.complete(
        ChatRequest.user(model, prompt, temperature=FILTER_TEMPERATURE, max_tokens=FILTER_MAX_TOKENS, tag=f"classify:{page.keyword}")
    )
    match = _ABC.match(resp.content.strip())
    if match is None:
        logger.warning("unparseable cultural classification for %r: %.60r", page.title, resp.content)
        return CulturalClass.NEITHER
    return {"a": CulturalClass.DIFFERENTIAL, "b": CulturalClass.UNIQUE, "c": CulturalClass.NEITHER}[match.group(1).lower()]


def run_retrieval(
    taxonomy: Taxonomy,
    lang_code: str,
    source: PageSource,
    gateway: LlmGateway,
    model: str,
    pages_per_arm: int = DEFAULT_PAGES_PER_ARM,
    max_page_chars: int = DEFAULT_MAX_PAGE_CHARS,
    concurrency: int = 8,
) -> tuple[list[PageRecord], dict[str, int]]:
    """Fetch + gate every keyword of a language; results keyed by taxonomy order."""
    lang = language(lang_code)
    tasks: list[tuple[tuple[str, str, str], str]] = []
    for topic in taxonomy.iter_tertiaries(lang_code):
        path = (topic.parent[0], topic.parent[1], topic.name)
        seen: set[str] = set()
        for keyword in topic.keywords:
            if keyword.lower() in seen:
                continue
            seen.add(keyword.lower())
            tasks.append((path, keyword))

    counts = {"keywords": len(tasks), "pages_fetched": 0, "dropped_relevance": 0, "dropped_neither": 0, "pages_kept": 0}

    def _one(path: tuple[str, str, str], keyword: str) -> list[PageRecord]:
        translated = translate_keyword(keyword, lang_code, gateway, model)
        pages = fetch_pages(keyword, lang_code, source, translated=translated,
                            pages_per_arm=pages_per_arm, max_page_chars=max_page_chars)
        kept: list[PageRecord] = []
        for page in pages:
            counts["pages_fetched"] += 1
            if not filter_keyword_relevance(page, keyword, gateway, model):
                counts["dropped_relevance"] += 1
                continue
            cls = classify_cultural_content(page, lang.country, primary_topic(path[0]).name, gateway, model)
            if cls is CulturalClass.NEITHER:
                counts["dropped_neither"] += 1
                continue
            kept.append(
                PageRecord(page=page, language=lang_code, topic_path=path,
                           translated_keyword=translated, classification=cls.value)
            )
        return kept

    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        futures = [pool.submit(_one, path, keyword) for path, keyword in tasks]
        records: list[PageRecord] = []
        for future in futures:  # submission (taxonomy) order keeps output deterministic
            records.extend(future.result())

    counts["pages_kept"] = len(records)
    return records, counts


def write_page_records(records: list[PageRecord], path: Path | str) -> int:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")
    return len(records)


def read_page_records(path: Path | str) -> list[PageRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(PageRecord.from_dict(json.loads(line)))
    return records
