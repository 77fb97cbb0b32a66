"""Shared domain types: language registry, topic taxonomy, QA pairs, validation."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator


class UnknownLanguage(ValueError):
    """A language code outside the closed 7-entry registry."""


class UnknownTopic(ValueError):
    """A (primary, secondary) pair that does not exist in the taxonomy."""


@dataclass(frozen=True)
class Language:
    code: str
    name: str
    country: str
    family: str


# Closed registry; extensible by design but ships with exactly these 7 entries.
LANGUAGES: dict[str, Language] = {
    lang.code: lang
    for lang in (
        Language("ar", "Arabic", "Saudi Arabia", "Afro-Asiatic"),
        Language("es", "Spanish", "Spain", "Indo-European"),
        Language("fr", "French", "France", "Indo-European"),
        Language("ja", "Japanese", "Japan", "Japonic"),
        Language("ko", "Korean", "South Korea", "Koreanic"),
        Language("pt", "Portuguese", "Portugal", "Indo-European"),
        Language("zh", "Chinese", "China", "Sino-Tibetan"),
    )
}

LANGUAGE_CODES: tuple[str, ...] = tuple(sorted(LANGUAGES))


def language(code: str) -> Language:
    try:
        return LANGUAGES[code]
    except KeyError:
        raise UnknownLanguage(f"unknown language code {code!r}; expected one of {sorted(LANGUAGES)}") from None


@dataclass(frozen=True)
class PrimaryTopic:
    abbrev: str
    name: str


PRIMARY_TOPICS: tuple[PrimaryTopic, ...] = (
    PrimaryTopic("SS", "Social Sciences"),
    PrimaryTopic("PP", "Philosophy and Psychology"),
    PrimaryTopic("RT", "Religion and Theology"),
    PrimaryTopic("PS", "Political Science"),
    PrimaryTopic("LAW", "Law"),
    PrimaryTopic("EDU", "Education"),
    PrimaryTopic("LAN", "Language"),
    PrimaryTopic("LIT", "Literature"),
    PrimaryTopic("MED", "Medicine"),
    PrimaryTopic("AST", "Applied Sciences and Technology"),
    PrimaryTopic("ART", "Arts"),
    PrimaryTopic("RSE", "Recreation, Sports, and Entertainment"),
)

PRIMARY_ABBREVS: tuple[str, ...] = tuple(p.abbrev for p in PRIMARY_TOPICS)
_PRIMARY_BY_ABBREV = {p.abbrev: p for p in PRIMARY_TOPICS}


def primary_topic(abbrev: str) -> PrimaryTopic:
    try:
        return _PRIMARY_BY_ABBREV[abbrev]
    except KeyError:
        raise UnknownTopic(f"unknown primary topic {abbrev!r}") from None


@dataclass(frozen=True)
class TertiaryTopic:
    """A country-specific topic carrying search keywords.

    parent is (primary_abbrev, secondary_name); language is a registry code.
    """

    name: str
    keywords: tuple[str, ...]
    language: str
    parent: tuple[str, str]


@dataclass
class Taxonomy:
    """Four-level topic tree: primary -> secondary -> tertiary -> keyword.

    tertiaries is keyed by language code, then by "ABBREV/secondary name".
    """

    primaries: list[PrimaryTopic] = field(default_factory=lambda: list(PRIMARY_TOPICS))
    secondaries: list[tuple[str, str]] = field(default_factory=list)
    tertiaries: dict[str, dict[str, list[TertiaryTopic]]] = field(default_factory=dict)

    def secondaries_of(self, primary_abbrev: str) -> list[str]:
        return [name for abbrev, name in self.secondaries if abbrev == primary_abbrev]

    def has_secondary(self, primary_abbrev: str, name: str) -> bool:
        return (primary_abbrev, name) in set(self.secondaries)

    @staticmethod
    def cell_key(primary_abbrev: str, secondary: str) -> str:
        return f"{primary_abbrev}/{secondary}"

    def cell(self, lang: str, primary_abbrev: str, secondary: str) -> list[TertiaryTopic]:
        return self.tertiaries.get(lang, {}).get(self.cell_key(primary_abbrev, secondary), [])

    def set_cell(self, lang: str, primary_abbrev: str, secondary: str, topics: list[TertiaryTopic]) -> None:
        self.tertiaries.setdefault(lang, {})[self.cell_key(primary_abbrev, secondary)] = list(topics)

    def iter_tertiaries(self, lang: str) -> Iterator[TertiaryTopic]:
        """Yields tertiary topics in taxonomy order (secondaries order, then in-cell order)."""
        for abbrev, secondary in self.secondaries:
            yield from self.cell(lang, abbrev, secondary)

    def count_tertiaries(self, lang: str) -> int:
        return sum(1 for _ in self.iter_tertiaries(lang))

    def resolves(self, lang: str, topic_path: tuple[str, str, str]) -> bool:
        primary_abbrev, secondary, tertiary = topic_path
        return any(t.name == tertiary for t in self.cell(lang, primary_abbrev, secondary))

    def to_dict(self) -> dict:
        return {
            "primaries": [{"abbrev": p.abbrev, "name": p.name} for p in self.primaries],
            "secondaries": [{"primary": a, "name": n} for a, n in self.secondaries],
            "tertiaries": {
                lang: {
                    key: [{"name": t.name, "keywords": list(t.keywords)} for t in topics]
                    for key, topics in cells.items()
                }
                for lang, cells in self.tertiaries.items()
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Taxonomy":
        primaries = [PrimaryTopic(p["abbrev"], p["name"]) for p in data.get("primaries", [])]
        secondaries = [(s["primary"], s["name"]) for s in data.get("secondaries", [])]
        tertiaries: dict[str, dict[str, list[TertiaryTopic]]] = {}
        for lang, cells in data.get("tertiaries", {}).items():
            tertiaries[lang] = {}
            for key, topics in cells.items():
                primary_abbrev, _, secondary = key.partition("/")
                tertiaries[lang][key] = [
                    TertiaryTopic(
                        name=t["name"],
                        keywords=tuple(t.get("keywords", [])),
                        language=lang,
                        parent=(primary_abbrev, secondary),
                    )
                    for t in topics
                ]
        return cls(primaries=primaries, secondaries=secondaries, tertiaries=tertiaries)

    def save(self, path: Path | str) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), ensure_ascii=False, indent=2, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path: Path | str) -> "Taxonomy":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def load_universal_taxonomy() -> Taxonomy:
    """The bundled universal tier: 12 primaries, 130 secondaries, no tertiaries."""
    text = resources.files("culturebench.data").joinpath("universal_taxonomy.json").read_text(encoding="utf-8")
    return Taxonomy.from_dict(json.loads(text))


def load_country_names() -> dict[str, list[str]]:
    """Registry country names (endonyms + English exonyms) per language code."""
    text = resources.files("culturebench.data").joinpath("country_names.json").read_text(encoding="utf-8")
    return json.loads(text)


@dataclass(frozen=True)
class ValidationIssue:
    node: str
    rule: str
    detail: str = ""


def validate_taxonomy(taxonomy: Taxonomy) -> list[ValidationIssue]:
    """Empty result iff all structural invariants hold; issues are data, not failures."""
    issues: list[ValidationIssue] = []

    seen_abbrevs: set[str] = set()
    for p in taxonomy.primaries:
        if p.abbrev in seen_abbrevs:
            issues.append(ValidationIssue(p.abbrev, "duplicate_primary"))
        seen_abbrevs.add(p.abbrev)
        if p.abbrev not in _PRIMARY_BY_ABBREV:
            issues.append(ValidationIssue(p.abbrev, "unknown_primary", p.name))
    if len(taxonomy.primaries) != len(PRIMARY_TOPICS):
        issues.append(
            ValidationIssue("primaries", "primary_count", f"expected {len(PRIMARY_TOPICS)}, got {len(taxonomy.primaries)}")
        )

    secondary_set: set[tuple[str, str]] = set()
    for abbrev, name in taxonomy.secondaries:
        if abbrev not in seen_abbrevs:
            issues.append(ValidationIssue(f"{abbrev}/{name}", "dangling_parent", f"no primary {abbrev!r}"))
        if (abbrev, name) in secondary_set:
            issues.append(ValidationIssue(f"{abbrev}/{name}", "duplicate_secondary"))
        secondary_set.add((abbrev, name))

    for lang, cells in taxonomy.tertiaries.items():
        if lang not in LANGUAGES:
            issues.append(ValidationIssue(lang, "unknown_language"))
        for key, topics in cells.items():
            primary_abbrev, _, secondary = key.partition("/")
            if (primary_abbrev, secondary) not in secondary_set:
                issues.append(ValidationIssue(f"{lang}:{key}", "dangling_parent", "cell has no matching secondary"))
            names: set[str] = set()
            for topic in topics:
                node = f"{lang}:{key}:{topic.name}"
                if topic.name in names:
                    issues.append(ValidationIssue(node, "duplicate_tertiary"))
                names.add(topic.name)
                if not topic.name.strip():
                    issues.append(ValidationIssue(node, "empty_name"))
                if not topic.keywords or any(not k.strip() for k in topic.keywords):
                    issues.append(ValidationIssue(node, "empty_keywords"))
    return issues


QA_SETTINGS = ("differential", "unique")
QA_STATUSES = ("raw", "validated", "annotated")


def qa_id(lang_code: str, question: str, answer: str) -> str:
    """Stable 16-hex-char content id; pure function of (language, question, answer)."""
    payload = "\x1f".join((lang_code, question, answer)).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()[:16]


@dataclass(frozen=True)
class QAPair:
    id: str
    language: str
    topic_path: tuple[str, str, str]
    keyword: str
    question: str
    answer: str
    setting: str
    provenance: tuple[str, str, int]  # (page_title, page_url, knowledge_index)
    status: str = "raw"

    @classmethod
    def build(
        cls,
        language: str,
        topic_path: tuple[str, str, str],
        keyword: str,
        question: str,
        answer: str,
        setting: str,
        provenance: tuple[str, str, int],
        status: str = "raw",
    ) -> "QAPair":
        if setting not in QA_SETTINGS:
            raise ValueError(f"setting must be one of {QA_SETTINGS}, got {setting!r}")
        if status not in QA_STATUSES:
            raise ValueError(f"status must be one of {QA_STATUSES}, got {status!r}")
        if not question.strip() or not answer.strip():
            raise ValueError("question and answer must be non-empty")
        return cls(
            id=qa_id(language, question, answer),
            language=language,
            topic_path=topic_path,
            keyword=keyword,
            question=question,
            answer=answer,
            setting=setting,
            provenance=provenance,
            status=status,
        )

    def with_status(self, status: str) -> "QAPair":
        if status not in QA_STATUSES:
            raise ValueError(f"status must be one of {QA_STATUSES}, got {status!r}")
        return replace(self, status=status)

    def topic_path_str(self) -> str:
        primary = _PRIMARY_BY_ABBREV.get(self.topic_path[0])
        head = primary.name if primary else self.topic_path[0]
        return " / ".join((head, self.topic_path[1], self.topic_path[2]))

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "language": self.language,
            "topic_path": list(self.topic_path),
            "keyword": self.keyword,
            "question": self.question,
            "answer": self.answer,
            "setting": self.setting,
            "provenance": {
                "page_title": self.provenance[0],
                "page_url": self.provenance[1],
                "knowledge_index": self.provenance[2],
            },
            "status": self.status,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "QAPair":
        prov = data["provenance"]
        return cls(
            id=data["id"],
            language=data["language"],
            topic_path=tuple(data["topic_path"]),
            keyword=data["keyword"],
            question=data["question"],
            answer=data["answer"],
            setting=data["setting"],
            provenance=(prov["page_title"], prov["page_url"], int(prov["knowledge_index"])),
            status=data.get("status", "raw"),
        )


def write_pool(pairs: Iterable[QAPair], path: Path | str) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(json.dumps(pair.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")
            n += 1
    return n


def read_pool(path: Path | str) -> list[QAPair]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                pairs.append(QAPair.from_dict(json.loads(line)))
    return pairs
