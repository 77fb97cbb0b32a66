"""Annotation persistence and acceptance-rate arithmetic.

Persistence is an append-only JSONL event log with the in-memory index rebuilt
at startup; resubmissions overwrite logically (latest revision wins on read).
"""

from __future__ import annotations

import json
import random
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from ..core import QAPair

DIMENSIONS = ("clarity", "relevance", "answer_quality")
ANNOTATOR_ROLES = ("A", "B")
DEFAULT_BATCH_SIZE = 120
HIGH_QUALITY_THRESHOLD = 4  # answer_quality >= 4 counts as accepted


class ScoreOutOfRange(ValueError):
    pass


class NotAssigned(PermissionError):
    pass


class InsufficientPool(ValueError):
    pass


def _round1(value: float) -> float:
    return float(Decimal(repr(value)).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class AnnotationRecord:
    qa_id: str
    annotator_id: str
    clarity: int  # 0/1
    relevance: int  # 0/1
    answer_quality: int  # 0..5
    submitted_at: str = ""

    def validate_scores(self) -> None:
        if self.clarity not in (0, 1):
            raise ScoreOutOfRange(f"clarity must be 0 or 1, got {self.clarity}")
        if self.relevance not in (0, 1):
            raise ScoreOutOfRange(f"relevance must be 0 or 1, got {self.relevance}")
        if not 0 <= self.answer_quality <= 5:
            raise ScoreOutOfRange(f"answer_quality must be 0..5, got {self.answer_quality}")

    def to_dict(self) -> dict:
        return {
            "qa_id": self.qa_id,
            "annotator_id": self.annotator_id,
            "clarity": self.clarity,
            "relevance": self.relevance,
            "answer_quality": self.answer_quality,
            "submitted_at": self.submitted_at,
        }


@dataclass(frozen=True)
class AnnotationBatch:
    batch_id: str
    language: str
    qa_ids: tuple[str, ...]
    annotators: tuple[str, str]

    def to_dict(self) -> dict:
        return {
            "batch_id": self.batch_id,
            "language": self.language,
            "qa_ids": list(self.qa_ids),
            "annotators": list(self.annotators),
        }


def sample_batch(
    pool: Sequence[QAPair],
    language: str,
    size: int = DEFAULT_BATCH_SIZE,
    seed: int = 0,
    annotators: Sequence[str] = (),
) -> AnnotationBatch:
    """Seeded uniform sample without replacement from the language's pool."""
    if len(annotators) != 2:
        raise ValueError("exactly 2 annotator ids required")
    candidates = sorted({p.id for p in pool if p.language == language})
    if len(candidates) < size:
        raise InsufficientPool(f"pool has {len(candidates)} {language} pairs, need {size}")
    rng = random.Random(f"{seed}:{language}")
    qa_ids = tuple(rng.sample(candidates, size))
    return AnnotationBatch(
        batch_id=f"{language}-{seed}-{size}",
        language=language,
        qa_ids=qa_ids,
        annotators=(annotators[0], annotators[1]),
    )


@dataclass(frozen=True)
class _State:
    batches: dict[str, AnnotationBatch] = field(default_factory=dict)
    records: dict[tuple[str, str], tuple[AnnotationRecord, int]] = field(default_factory=dict)


class AnnotationStore:
    """Append-only event log; reads see an immutable snapshot swapped on write."""

    def __init__(self, log_path: Path | str):
        self._path = Path(log_path)
        self._lock = threading.Lock()
        self._state = _State()
        if self._path.exists():
            self._replay()

    def _replay(self) -> None:
        batches: dict[str, AnnotationBatch] = {}
        records: dict[tuple[str, str], tuple[AnnotationRecord, int]] = {}
        with open(self._path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                event = json.loads(line)
                if event["type"] == "batch":
                    batch = AnnotationBatch(
                        batch_id=event["batch_id"],
                        language=event["language"],
                        qa_ids=tuple(event["qa_ids"]),
                        annotators=tuple(event["annotators"]),
                    )
                    batches[batch.batch_id] = batch
                elif event["type"] == "annotation":
                    record = AnnotationRecord(
                        qa_id=event["qa_id"],
                        annotator_id=event["annotator_id"],
                        clarity=int(event["clarity"]),
                        relevance=int(event["relevance"]),
                        answer_quality=int(event["answer_quality"]),
                        submitted_at=event.get("submitted_at", ""),
                    )
                    records[(record.qa_id, record.annotator_id)] = (record, int(event["revision"]))
        self._state = _State(batches=batches, records=records)

    def _append(self, event: dict) -> None:
        self._path.parent.mkdir(parents=True, exist_ok=True)
        with open(self._path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, ensure_ascii=False, sort_keys=True) + "\n")
            fh.flush()

    @property
    def batches(self) -> dict[str, AnnotationBatch]:
        return self._state.batches

    def batches_for(self, annotator_id: str) -> list[AnnotationBatch]:
        return [b for b in self._state.batches.values() if annotator_id in b.annotators]

    def add_batch(self, batch: AnnotationBatch) -> None:
        with self._lock:
            batches = dict(self._state.batches)
            batches[batch.batch_id] = batch
            self._append({"type": "batch", **batch.to_dict()})
            self._state = _State(batches=batches, records=self._state.records)

    def is_assigned(self, qa_id: str, annotator_id: str) -> bool:
        return any(
            annotator_id in batch.annotators and qa_id in batch.qa_ids
            for batch in self._state.batches.values()
        )

    def submit(self, record: AnnotationRecord) -> int:
        """Durably appends; returns the stored revision (1-based, last write wins)."""
        record.validate_scores()
        if not self.is_assigned(record.qa_id, record.annotator_id):
            raise NotAssigned(f"qa {record.qa_id!r} is not assigned to {record.annotator_id!r}")
        if not record.submitted_at:
            record = AnnotationRecord(
                qa_id=record.qa_id,
                annotator_id=record.annotator_id,
                clarity=record.clarity,
                relevance=record.relevance,
                answer_quality=record.answer_quality,
                submitted_at=datetime.now(timezone.utc).isoformat(),
            )
        with self._lock:
            key = (record.qa_id, record.annotator_id)
            revision = self._state.records.get(key, (None, 0))[1] + 1
            self._append({"type": "annotation", **record.to_dict(), "revision": revision})
            records = dict(self._state.records)
            records[key] = (record, revision)
            self._state = _State(batches=self._state.batches, records=records)
            return revision

    def record_for(self, qa_id: str, annotator_id: str) -> AnnotationRecord | None:
        entry = self._state.records.get((qa_id, annotator_id))
        return entry[0] if entry else None

    def records(self) -> list[AnnotationRecord]:
        return [record for record, _ in self._state.records.values()]


def _rate(records: list[AnnotationRecord], dimension: str) -> float:
    values = {
        "clarity": lambda r: r.clarity == 1,
        "relevance": lambda r: r.relevance == 1,
        "answer_quality": lambda r: r.answer_quality >= HIGH_QUALITY_THRESHOLD,
    }[dimension]
    return 100.0 * sum(1 for r in records if values(r)) / len(records)


def _mean(values: Iterable[float]) -> float:
    values = list(values)
    return sum(values) / len(values)


@dataclass
class AcceptanceTable:
    """Per-annotator rates plus averages; values held unrounded, rounded on export."""

    languages: list[str]
    per_annotator: dict[tuple[str, str, str], float]  # (language, role, dimension) -> %
    language_average: dict[tuple[str, str], float]  # (language, dimension) -> %
    annotator_overall: dict[tuple[str, str], float]  # (role, dimension) -> %
    overall: dict[str, float]  # dimension -> %
    incomplete: bool = False
    submitted: dict[tuple[str, str], int] = field(default_factory=dict)  # (language, role) -> count

    @classmethod
    def from_rates(
        cls,
        rates: Mapping[str, Mapping[str, tuple[float, float]]],
        incomplete: bool = False,
    ) -> "AcceptanceTable":
        """Builds the averages from per-annotator rates: rates[dimension][language] = (A, B)."""
        languages = sorted({lang for by_lang in rates.values() for lang in by_lang})
        per_annotator: dict[tuple[str, str, str], float] = {}
        language_average: dict[tuple[str, str], float] = {}
        annotator_overall: dict[tuple[str, str], float] = {}
        overall: dict[str, float] = {}
        for dimension, by_lang in rates.items():
            for lang, (rate_a, rate_b) in by_lang.items():
                per_annotator[(lang, "A", dimension)] = rate_a
                per_annotator[(lang, "B", dimension)] = rate_b
                language_average[(lang, dimension)] = (rate_a + rate_b) / 2
            for role, pick in (("A", 0), ("B", 1)):
                annotator_overall[(role, dimension)] = _mean(by_lang[lang][pick] for lang in by_lang)
            overall[dimension] = (annotator_overall[("A", dimension)] + annotator_overall[("B", dimension)]) / 2
        return cls(
            languages=languages,
            per_annotator=per_annotator,
            language_average=language_average,
            annotator_overall=annotator_overall,
            overall=overall,
            incomplete=incomplete,
        )

    def to_dict(self) -> dict:
        """One-decimal half-up rounding, matching the published presentation."""
        out: dict = {"languages": self.languages, "incomplete": self.incomplete, "dimensions": {}}
        for dimension in DIMENSIONS:
            if dimension not in self.overall and all(key[2] != dimension for key in self.per_annotator):
                continue
            dim_out: dict = {"per_annotator": {}, "language_average": {}, "annotator_overall": {}, "overall": None}
            for lang in self.languages:
                for role in ANNOTATOR_ROLES:
                    value = self.per_annotator.get((lang, role, dimension))
                    if value is not None:
                        dim_out["per_annotator"].setdefault(lang, {})[role] = _round1(value)
                avg = self.language_average.get((lang, dimension))
                if avg is not None:
                    dim_out["language_average"][lang] = _round1(avg)
            for role in ANNOTATOR_ROLES:
                value = self.annotator_overall.get((role, dimension))
                if value is not None:
                    dim_out["annotator_overall"][role] = _round1(value)
            if dimension in self.overall:
                dim_out["overall"] = _round1(self.overall[dimension])
            out["dimensions"][dimension] = dim_out
        if self.submitted:
            out["submitted"] = {f"{lang}/{role}": n for (lang, role), n in sorted(self.submitted.items())}
        return out


def acceptance_rates(
    records: Iterable[AnnotationRecord], batches: Iterable[AnnotationBatch]
) -> AcceptanceTable:
    """Pure function of the record set; partial batches yield rates over submitted counts.

    A per-annotator rate appears as soon as that annotator has any records; the
    per-language average requires both assigned annotators.
    """
    by_key: dict[tuple[str, str], AnnotationRecord] = {}
    for record in records:
        by_key[(record.qa_id, record.annotator_id)] = record

    per_annotator: dict[tuple[str, str, str], float] = {}
    language_average: dict[tuple[str, str], float] = {}
    submitted: dict[tuple[str, str], int] = {}
    incomplete = False
    languages: list[str] = []
    for batch in sorted(batches, key=lambda b: b.batch_id):
        languages.append(batch.language)
        per_role: dict[str, list[AnnotationRecord]] = {}
        for role, annotator_id in zip(ANNOTATOR_ROLES, batch.annotators):
            recs = [by_key[(qa, annotator_id)] for qa in batch.qa_ids if (qa, annotator_id) in by_key]
            per_role[role] = recs
            submitted[(batch.language, role)] = len(recs)
            if len(recs) < len(batch.qa_ids):
                incomplete = True
        for dimension in DIMENSIONS:
            for role in ANNOTATOR_ROLES:
                if per_role[role]:
                    per_annotator[(batch.language, role, dimension)] = _rate(per_role[role], dimension)
            if per_role["A"] and per_role["B"]:
                language_average[(batch.language, dimension)] = (
                    per_annotator[(batch.language, "A", dimension)]
                    + per_annotator[(batch.language, "B", dimension)]
                ) / 2

    annotator_overall: dict[tuple[str, str], float] = {}
    overall: dict[str, float] = {}
    for dimension in DIMENSIONS:
        for role in ANNOTATOR_ROLES:
            values = [per_annotator[key] for key in per_annotator if key[1] == role and key[2] == dimension]
            if values:
                annotator_overall[(role, dimension)] = _mean(values)
        if (("A", dimension)) in annotator_overall and (("B", dimension)) in annotator_overall:
            overall[dimension] = (annotator_overall[("A", dimension)] + annotator_overall[("B", dimension)]) / 2

    return AcceptanceTable(
        languages=sorted(set(languages)),
        per_annotator=per_annotator,
        language_average=language_average,
        annotator_overall=annotator_overall,
        overall=overall,
        incomplete=incomplete,
        submitted=submitted,
    )
