"""Mini/max pool splitting with per-language tertiary-topic disjointness, plus corpus stats.

The mini side takes ALL pairs under the tertiary topics drawn per
(language, primary); everything else lands in max, so the two sides never
share a tertiary topic within a language.
"""

from __future__ import annotations

import csv
import random
import statistics
import unicodedata
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

from .core import LANGUAGES, PRIMARY_ABBREVS, QAPair, language

# Table-style row order: Indo-European block first, then by family.
STATS_LANGUAGE_ORDER = ("es", "fr", "pt", "ar", "zh", "ja", "ko")

WHITESPACE_TOKENIZED = frozenset({"ar", "es", "fr", "pt", "ko"})
CODEPOINT_TOKENIZED = frozenset({"zh", "ja"})


def round_half_up(value: float, ndigits: int = 0) -> float:
    quantum = Decimal(1).scaleb(-ndigits)
    return float(Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP))


def token_count(text: str, lang_code: str) -> int:
    """Whitespace tokens, except zh/ja where codepoints minus spaces/punctuation count."""
    if lang_code in CODEPOINT_TOKENIZED:
        return sum(
            1
            for ch in text
            if not unicodedata.category(ch).startswith(("P", "Z", "C"))
        )
    return len(text.split())


@dataclass(frozen=True)
class SplitSpec:
    topics_per_primary: int = 20
    seed: int = 20240513
    language_scope: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.topics_per_primary < 1:
            raise ValueError("topics_per_primary must be >= 1")


def _topic_key(pair: QAPair) -> tuple[str, str]:
    return (pair.topic_path[1], pair.topic_path[2])


def split_pool(pool: list[QAPair], spec: SplitSpec) -> tuple[list[QAPair], list[QAPair]]:
    """Seeded draw of up to topics_per_primary tertiary topics per (language, primary).

    Deterministic given the pool contents and seed: the pool is order-normalized
    by id before grouping, and each cell uses its own derived generator.
    """
    ordered = sorted(pool, key=lambda p: (p.id, p.language, p.question))
    in_scope = set(spec.language_scope) if spec.language_scope else None

    cell_topics: dict[tuple[str, str], list[tuple[str, str]]] = {}
    for pair in ordered:
        if in_scope is not None and pair.language not in in_scope:
            continue
        cell = (pair.language, pair.topic_path[0])
        topics = cell_topics.setdefault(cell, [])
        key = _topic_key(pair)
        if key not in topics:
            topics.append(key)

    chosen: dict[tuple[str, str], set[tuple[str, str]]] = {}
    for cell in sorted(cell_topics):
        topics = sorted(cell_topics[cell])
        rng = random.Random(f"{spec.seed}:{cell[0]}:{cell[1]}")
        k = min(spec.topics_per_primary, len(topics))
        chosen[cell] = set(rng.sample(topics, k))

    mini: list[QAPair] = []
    maxi: list[QAPair] = []
    for pair in ordered:
        cell = (pair.language, pair.topic_path[0])
        if cell in chosen and _topic_key(pair) in chosen[cell]:
            mini.append(pair)
        else:
            maxi.append(pair)
    return mini, maxi


def cap_cells(pool: list[QAPair], cap_per_cell: int, seed: int) -> list[QAPair]:
    """Trims overfull (language, primary) cells uniformly at random, seeded."""
    by_cell: dict[tuple[str, str], list[QAPair]] = {}
    for pair in sorted(pool, key=lambda p: p.id):
        by_cell.setdefault((pair.language, pair.topic_path[0]), []).append(pair)
    keep_ids: set[str] = set()
    for cell in sorted(by_cell):
        pairs = by_cell[cell]
        if len(pairs) <= cap_per_cell:
            keep_ids.update(p.id for p in pairs)
        else:
            rng = random.Random(f"{seed}:cap:{cell[0]}:{cell[1]}")
            keep_ids.update(p.id for p in rng.sample(pairs, cap_per_cell))
    return [pair for pair in pool if pair.id in keep_ids]


@dataclass(frozen=True)
class LanguageStats:
    code: str
    name: str
    family: str
    total_qa: int
    percentage: float
    question_avg: int
    question_max: int
    answer_avg: int
    answer_max: int
    answer_std: int


@dataclass
class CorpusStats:
    total_qa: int
    rows: list[LanguageStats] = field(default_factory=list)

    def row(self, code: str) -> LanguageStats:
        for row in self.rows:
            if row.code == code:
                return row
        raise KeyError(code)


def compute_stats(pool: list[QAPair]) -> CorpusStats:
    """Length stats in tokens; averages and std presented as integers, percentage one decimal."""
    total = len(pool)
    by_lang: dict[str, list[QAPair]] = {code: [] for code in STATS_LANGUAGE_ORDER}
    for pair in pool:
        by_lang.setdefault(pair.language, []).append(pair)

    rows = []
    for code in STATS_LANGUAGE_ORDER:
        pairs = by_lang.get(code, [])
        lang = language(code)
        q_lens = [token_count(p.question, code) for p in pairs]
        a_lens = [token_count(p.answer, code) for p in pairs]
        rows.append(
            LanguageStats(
                code=code,
                name=lang.name,
                family=lang.family,
                total_qa=len(pairs),
                percentage=round_half_up(100.0 * len(pairs) / total, 1) if total else 0.0,
                question_avg=int(round_half_up(statistics.mean(q_lens))) if q_lens else 0,
                question_max=max(q_lens, default=0),
                answer_avg=int(round_half_up(statistics.mean(a_lens))) if a_lens else 0,
                answer_max=max(a_lens, default=0),
                answer_std=int(round_half_up(statistics.pstdev(a_lens))) if a_lens else 0,
            )
        )
    return CorpusStats(total_qa=total, rows=rows)


def topic_distribution(pool: list[QAPair]) -> dict[tuple[str, str], int]:
    """Complete zero-filled language x primary matrix."""
    table = {(code, abbrev): 0 for code in sorted(LANGUAGES) for abbrev in PRIMARY_ABBREVS}
    for pair in pool:
        key = (pair.language, pair.topic_path[0])
        if key in table:
            table[key] += 1
        else:
            table[key] = table.get(key, 0) + 1
    return table


def write_stats_csv(stats: CorpusStats, path: Path | str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["language", "code", "language_family", "total_qa", "percentage",
             "question_avg", "question_max", "answer_avg", "answer_max", "answer_std"]
        )
        for row in stats.rows:
            writer.writerow(
                [row.name, row.code, row.family, row.total_qa, f"{row.percentage:.1f}",
                 row.question_avg, row.question_max, row.answer_avg, row.answer_max, row.answer_std]
            )


def write_distribution_csv(table: dict[tuple[str, str], int], path: Path | str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["language", "primary", "count"])
        for code in sorted(LANGUAGES):
            for abbrev in PRIMARY_ABBREVS:
                writer.writerow([code, abbrev, table.get((code, abbrev), 0)])
