"""Reference-guided pairwise judging: verdict parsing, scoring, and net-win-rate reports.

Net win rate = (target wins - baseline wins) / total comparisons, computed in
exact rational arithmetic; unparseable verdicts stay in the denominator and
contribute zero to the numerator.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path
from typing import Iterable

from .core import LANGUAGES, PRIMARY_TOPICS, QAPair
from .gateway import ChatRequest, LlmGateway
from .prompts import render_named

logger = logging.getLogger(__name__)

JUDGE_TEMPERATURE = 0.0
JUDGE_MAX_TOKENS = 1024
RESPONSE_TEMPERATURE = 0.7
RESPONSE_MAX_TOKENS = 1024

_VERDICT_TOKEN = re.compile(r"\[\[([ABC])\]\]")


class EmptyTally(ValueError):
    pass


class UnparseableVerdict(ValueError):
    pass


class NoOverlap(ValueError):
    pass


@dataclass(frozen=True)
class ComparisonTask:
    qa_id: str
    question: str
    reference_answer: str
    target_model: str
    baseline_model: str
    target_position: str  # "A" | "B", fixed before any judge call
    judge_model: str
    language: str = ""
    topic_path: tuple[str, str, str] = ("", "", "")

    def __post_init__(self) -> None:
        if self.target_position not in ("A", "B"):
            raise ValueError("target_position must be A or B")
        if self.target_model == self.baseline_model:
            raise ValueError("target and baseline must differ")


def assign_position(qa_id: str, target_model: str, seed: int) -> str:
    """Seeded pure function; re-running an evaluation reuses identical assignments."""
    digest = hashlib.sha256(f"{seed}:{qa_id}:{target_model}".encode("utf-8")).digest()
    return "A" if digest[0] % 2 == 0 else "B"


def build_judgment_prompt(task: ComparisonTask, answer_a: str, answer_b: str) -> str:
    if not answer_a.strip() or not answer_b.strip():
        raise ValueError("both candidate answers must be non-empty")
    return render_named(
        "judge_pairwise",
        question=task.question,
        answer_ref=task.reference_answer,
        answer_a=answer_a,
        answer_b=answer_b,
    )


def parse_verdict(text: str) -> str:
    """Last [[A]]/[[B]]/[[C]] wins; judges often restate the format before deciding."""
    tokens = _VERDICT_TOKEN.findall(text or "")
    return tokens[-1] if tokens else "unparseable"


def score_for_target(verdict: str, target_position: str) -> int:
    if verdict == "unparseable":
        raise UnparseableVerdict("cannot score an unparseable verdict")
    if verdict == "C":
        return 0
    return 1 if verdict == target_position else -1


@dataclass(frozen=True)
class JudgeVerdict:
    qa_id: str
    target_model: str
    baseline_model: str
    judge_model: str
    target_position: str
    raw_verdict: str  # "A" | "B" | "C" | "unparseable"
    score: int | None  # +1 / 0 / -1, None when unparseable
    raw_text: str
    language: str = ""
    topic_path: tuple[str, str, str] = ("", "", "")

    def to_dict(self) -> dict:
        return {
            "qa_id": self.qa_id,
            "target_model": self.target_model,
            "baseline_model": self.baseline_model,
            "judge_model": self.judge_model,
            "target_position": self.target_position,
            "raw_verdict": self.raw_verdict,
            "score": self.score,
            "raw_text": self.raw_text,
            "language": self.language,
            "topic_path": list(self.topic_path),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "JudgeVerdict":
        return cls(
            qa_id=data["qa_id"],
            target_model=data["target_model"],
            baseline_model=data["baseline_model"],
            judge_model=data["judge_model"],
            target_position=data["target_position"],
            raw_verdict=data["raw_verdict"],
            score=data["score"],
            raw_text=data.get("raw_text", ""),
            language=data.get("language", ""),
            topic_path=tuple(data.get("topic_path", ("", "", ""))),
        )


def verdict_from_text(task: ComparisonTask, raw_text: str) -> JudgeVerdict:
    raw = parse_verdict(raw_text)
    score = None if raw == "unparseable" else score_for_target(raw, task.target_position)
    return JudgeVerdict(
        qa_id=task.qa_id,
        target_model=task.target_model,
        baseline_model=task.baseline_model,
        judge_model=task.judge_model,
        target_position=task.target_position,
        raw_verdict=raw,
        score=score,
        raw_text=raw_text,
        language=task.language,
        topic_path=task.topic_path,
    )


@dataclass(frozen=True)
class EvalTally:
    n_target_wins: int = 0
    n_baseline_wins: int = 0
    n_ties: int = 0
    n_unparseable: int = 0

    def __post_init__(self) -> None:
        for value in (self.n_target_wins, self.n_baseline_wins, self.n_ties, self.n_unparseable):
            if value < 0:
                raise ValueError("tally counts must be non-negative")

    @property
    def n_total(self) -> int:
        return self.n_target_wins + self.n_baseline_wins + self.n_ties + self.n_unparseable

    def __add__(self, other: "EvalTally") -> "EvalTally":
        return EvalTally(
            self.n_target_wins + other.n_target_wins,
            self.n_baseline_wins + other.n_baseline_wins,
            self.n_ties + other.n_ties,
            self.n_unparseable + other.n_unparseable,
        )


def tally_verdicts(verdicts: Iterable[JudgeVerdict]) -> EvalTally:
    wins = losses = ties = unparseable = 0
    for v in verdicts:
        if v.score is None:
            unparseable += 1
        elif v.score > 0:
            wins += 1
        elif v.score < 0:
            losses += 1
        else:
            ties += 1
    return EvalTally(wins, losses, ties, unparseable)


def net_win_rate(tally: EvalTally) -> Fraction:
    """Exact rational (wins - losses) / total; unparseable stays in the denominator."""
    if tally.n_total == 0:
        raise EmptyTally("tally has no comparisons")
    return Fraction(tally.n_target_wins - tally.n_baseline_wins, tally.n_total)


@dataclass(frozen=True)
class ReportCell:
    group: str | tuple[str, str]
    net_win_rate: Fraction
    n_total: int

    def __post_init__(self) -> None:
        if abs(self.net_win_rate) > 1:
            raise ValueError("net win rate must lie in [-1, 1]")

    def as_percent(self) -> float:
        return float(self.net_win_rate * 100)


GROUP_BYS = ("language", "topic", "language_topic")


def _group_key(verdict: JudgeVerdict, group_by: str):
    if group_by == "language":
        return verdict.language
    if group_by == "topic":
        return verdict.topic_path[0]
    if group_by == "language_topic":
        return (verdict.language, verdict.topic_path[0])
    raise ValueError(f"group_by must be one of {GROUP_BYS}")


def aggregate(verdicts: list[JudgeVerdict], group_by: str) -> tuple[list[ReportCell], ReportCell]:
    """Per-group rates plus a count-weighted overall.

    The overall is the weighted average of group rates; weighting by n_total
    makes it equal the pooled-tally rate exactly.
    """
    groups: dict[object, list[JudgeVerdict]] = {}
    for verdict in verdicts:
        groups.setdefault(_group_key(verdict, group_by), []).append(verdict)

    cells = []
    for key in sorted(groups):
        tally = tally_verdicts(groups[key])
        cells.append(ReportCell(group=key, net_win_rate=net_win_rate(tally), n_total=tally.n_total))

    if not cells:
        raise EmptyTally("no verdicts to aggregate")
    total_n = sum(cell.n_total for cell in cells)
    weighted = sum((cell.net_win_rate * cell.n_total for cell in cells), start=Fraction(0)) / total_n
    overall = ReportCell(group="overall", net_win_rate=weighted, n_total=total_n)
    return cells, overall


def _preference(verdict: JudgeVerdict) -> int:
    # Position-normalized; unparseable normalizes to the tie preference.
    return 0 if verdict.score is None else verdict.score


def agreement_rate(verdicts_x: list[JudgeVerdict], verdicts_y: list[JudgeVerdict]) -> Fraction:
    """Share of common (qa_id, target_model) comparisons with identical preference."""
    by_key_x = {(v.qa_id, v.target_model): v for v in verdicts_x}
    by_key_y = {(v.qa_id, v.target_model): v for v in verdicts_y}
    common = sorted(by_key_x.keys() & by_key_y.keys())
    if not common:
        raise NoOverlap("judges share no comparison instances")
    identical = sum(1 for key in common if _preference(by_key_x[key]) == _preference(by_key_y[key]))
    return Fraction(identical, len(common))


def collect_responses(
    pairs: list[QAPair],
    models: list[str],
    gateway: LlmGateway,
    concurrency: int = 8,
) -> dict[tuple[str, str], str]:
    """One response per (question, model); decoding fixed at temperature 0.7."""

    def _one(pair: QAPair, model: str) -> tuple[tuple[str, str], str]:
        resp = gateway.complete(
            ChatRequest.user(
                model, pair.question, temperature=RESPONSE_TEMPERATURE, max_tokens=RESPONSE_MAX_TOKENS,
                tag=f"respond:{model}:{pair.id}",
            )
        )
        return (pair.id, model), resp.content.strip()

    jobs = [(pair, model) for pair in pairs for model in models]
    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        futures = [pool.submit(_one, pair, model) for pair, model in jobs]
        return dict(future.result() for future in futures)


def judge_task(
    task: ComparisonTask,
    target_answer: str,
    baseline_answer: str,
    gateway: LlmGateway,
    dual_pass: bool = False,
) -> JudgeVerdict:
    """Single pairwise comparison; dual-pass judges both orders and ties on conflict."""
    if task.target_position == "A":
        answer_a, answer_b = target_answer, baseline_answer
    else:
        answer_a, answer_b = baseline_answer, target_answer
    prompt = build_judgment_prompt(task, answer_a, answer_b)
    resp = gateway.complete(
        ChatRequest.user(
            task.judge_model, prompt, temperature=JUDGE_TEMPERATURE, max_tokens=JUDGE_MAX_TOKENS,
            tag=f"judge:{task.judge_model}:{task.target_model}:{task.qa_id}",
        )
    )
    verdict = verdict_from_text(task, resp.content)
    if not dual_pass:
        return verdict

    flipped_task = replace(task, target_position="B" if task.target_position == "A" else "A")
    flipped_prompt = build_judgment_prompt(flipped_task, answer_b, answer_a)
    flipped_resp = gateway.complete(
        ChatRequest.user(
            task.judge_model, flipped_prompt, temperature=JUDGE_TEMPERATURE, max_tokens=JUDGE_MAX_TOKENS,
            tag=f"judge-flip:{task.judge_model}:{task.target_model}:{task.qa_id}",
        )
    )
    flipped = verdict_from_text(flipped_task, flipped_resp.content)
    if verdict.score == flipped.score:
        return replace(verdict, raw_text=verdict.raw_text + "\n---\n" + flipped.raw_text)
    # Conflicting orders record a tie.
    return replace(
        verdict,
        raw_verdict="C",
        score=0,
        raw_text=verdict.raw_text + "\n---\n" + flipped.raw_text,
    )


def run_judging(
    pairs: list[QAPair],
    responses: dict[tuple[str, str], str],
    target_models: list[str],
    baseline_model: str,
    judge_models: list[str],
    gateway: LlmGateway,
    seed: int,
    concurrency: int = 4,
    dual_pass: bool = False,
) -> list[JudgeVerdict]:
    """Judges every (pair, target, judge) combination with seeded position assignment.

    Pairs lacking a collected response on either side are skipped with a warning.
    """
    jobs: list[tuple[ComparisonTask, str, str]] = []
    for judge_model in judge_models:
        for target_model in target_models:
            for pair in pairs:
                target_answer = responses.get((pair.id, target_model), "")
                baseline_answer = responses.get((pair.id, baseline_model), "")
                if not target_answer.strip() or not baseline_answer.strip():
                    logger.warning("missing response for qa %s (%s vs %s); skipped", pair.id, target_model, baseline_model)
                    continue
                task = ComparisonTask(
                    qa_id=pair.id,
                    question=pair.question,
                    reference_answer=pair.answer,
                    target_model=target_model,
                    baseline_model=baseline_model,
                    target_position=assign_position(pair.id, target_model, seed),
                    judge_model=judge_model,
                    language=pair.language,
                    topic_path=pair.topic_path,
                )
                jobs.append((task, target_answer, baseline_answer))

    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        futures = [pool.submit(judge_task, task, ta, ba, gateway, dual_pass) for task, ta, ba in jobs]
        return [future.result() for future in futures]


def write_verdicts(verdicts: list[JudgeVerdict], path: Path | str) -> int:
    with open(path, "w", encoding="utf-8") as fh:
        for verdict in verdicts:
            fh.write(json.dumps(verdict.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")
    return len(verdicts)


def read_verdicts(path: Path | str) -> list[JudgeVerdict]:
    verdicts = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                verdicts.append(JudgeVerdict.from_dict(json.loads(line)))
    return verdicts


def _pct(rate: Fraction) -> str:
    return f"{float(rate * 100):.2f}"


def write_language_report(verdicts: list[JudgeVerdict], path: Path | str) -> None:
    """Model rows, one column per language display name, then the weighted average."""
    lang_names = [LANGUAGES[code].name for code in sorted(LANGUAGES, key=lambda c: LANGUAGES[c].name)]
    lang_codes = sorted(LANGUAGES, key=lambda c: LANGUAGES[c].name)
    by_target: dict[str, list[JudgeVerdict]] = {}
    for verdict in verdicts:
        by_target.setdefault(verdict.target_model, []).append(verdict)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["Model", *lang_names, "Weighted Average"])
        for target in sorted(by_target):
            cells, overall = aggregate(by_target[target], "language")
            by_lang = {cell.group: cell for cell in cells}
            row = [target]
            for code in lang_codes:
                cell = by_lang.get(code)
                row.append(_pct(cell.net_win_rate) if cell else "")
            row.append(_pct(overall.net_win_rate))
            writer.writerow(row)


def write_topic_report(verdicts: list[JudgeVerdict], path: Path | str) -> None:
    """Model rows, one column per primary topic name."""
    by_target: dict[str, list[JudgeVerdict]] = {}
    for verdict in verdicts:
        by_target.setdefault(verdict.target_model, []).append(verdict)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["Model", *[p.name for p in PRIMARY_TOPICS]])
        for target in sorted(by_target):
            cells, _ = aggregate(by_target[target], "topic")
            by_abbrev = {cell.group: cell for cell in cells}
            row = [target]
            for topic in PRIMARY_TOPICS:
                cell = by_abbrev.get(topic.abbrev)
                row.append(_pct(cell.net_win_rate) if cell else "")
            writer.writerow(row)


def write_language_topic_report(verdicts: list[JudgeVerdict], path: Path | str) -> None:
    """Long form: one row per (model, language, primary)."""
    by_target: dict[str, list[JudgeVerdict]] = {}
    for verdict in verdicts:
        by_target.setdefault(verdict.target_model, []).append(verdict)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["Model", "language", "primary", "net_win_rate", "n_total"])
        for target in sorted(by_target):
            cells, _ = aggregate(by_target[target], "language_topic")
            for cell in cells:
                lang_code, abbrev = cell.group
                writer.writerow([target, lang_code, abbrev, _pct(cell.net_win_rate), cell.n_total])


def write_agreement_report(
    verdicts_by_judge: dict[str, list[JudgeVerdict]], path: Path | str
) -> dict[str, Fraction]:
    """Per-target-model strict agreement between the first two judges, with the mean row."""
    judges = sorted(verdicts_by_judge)
    if len(judges) < 2:
        raise NoOverlap("agreement needs verdicts from two judges")
    first, second = judges[0], judges[1]
    targets = sorted({v.target_model for v in verdicts_by_judge[first]})
    rates: dict[str, Fraction] = {}
    for target in targets:
        vx = [v for v in verdicts_by_judge[first] if v.target_model == target]
        vy = [v for v in verdicts_by_judge[second] if v.target_model == target]
        rates[target] = agreement_rate(vx, vy)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["Model", "Strict Agreement"])
        for target in targets:
            writer.writerow([target, _pct(rates[target]) + "%"])
        mean = sum(rates.values(), start=Fraction(0)) / len(rates)
        writer.writerow(["Average", _pct(mean) + "%"])
    return rates


def write_summary_json(verdicts: list[JudgeVerdict], path: Path | str) -> dict:
    """Every ReportCell for every target model and grouping, rates as percent floats."""
    summary: dict = {"targets": {}}
    by_target: dict[str, list[JudgeVerdict]] = {}
    for verdict in verdicts:
        by_target.setdefault(verdict.target_model, []).append(verdict)
    for target in sorted(by_target):
        entry: dict = {}
        for group_by in GROUP_BYS:
            cells, overall = aggregate(by_target[target], group_by)
            entry[group_by] = {
                "cells": [
                    {
                        "group": list(cell.group) if isinstance(cell.group, tuple) else cell.group,
                        "net_win_rate_pct": round(cell.as_percent(), 2),
                        "n_total": cell.n_total,
                    }
                    for cell in cells
                ],
                "overall_pct": round(overall.as_percent(), 2),
                "n_total": overall.n_total,
            }
        summary["targets"][target] = entry
    Path(path).write_text(json.dumps(summary, ensure_ascii=False, indent=2, sort_keys=True), encoding="utf-8")
    return summary
