"""Question and answer generation per knowledge point, plus structural validation.

Differential points get a situational question; unique points get an
expert-advice question. Every emitted pair keeps full provenance back to its
keyword, page, and knowledge index.
"""

from __future__ import annotations

import json
import logging
import re
import unicodedata
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .core import QAPair, language, load_country_names, primary_topic
from .extraction import KnowledgePoint, NotRecoverable, recover_json
from .gateway import ChatRequest, LlmGateway
from .prompts import render_named

logger = logging.getLogger(__name__)

GENERATION_TEMPERATURE = 0.7
QUESTION_MAX_TOKENS = 256
ANSWER_MAX_TOKENS = 1024

VIOLATION_CODES = ("empty_text", "country_name_mentioned", "language_mismatch", "refusal_detected")

# Hook for pre-generation screening; ships empty (encyclopedia sources plus
# generator-side safety cover the screening need).
KEYWORD_DENYLIST: frozenset[str] = frozenset()

REFUSAL_PHRASES = (
    "i cannot", "i can't", "i am sorry", "i'm sorry", "as an ai", "i am unable",
    "cannot assist", "can't assist", "cannot help with",
    "lo siento", "no puedo", "je ne peux pas", "désolé", "desculpe", "não posso",
    "申し訳ありません", "お答えできません", "죄송합니다", "답변할 수 없습니다",
    "无法回答", "抱歉", "لا أستطيع", "عذرًا",
)

_QUESTION_LABEL = re.compile(r"^\s*(?:question|質問|pregunta|pergunta|질문|问题|سؤال)\s*[:：]\s*", re.IGNORECASE)
_WRAPPING_QUOTES = ("\"", "'", "“", "”", "‘", "’", "«", "»", "「", "」", "『", "』")


class EmptyGeneration(ValueError):
    """The model produced no usable text."""


@dataclass(frozen=True)
class Violation:
    code: str
    detail: str = ""

    def __post_init__(self) -> None:
        if self.code not in VIOLATION_CODES:
            raise ValueError(f"unknown violation code {self.code!r}")


def _strip_wrapping(text: str) -> str:
    text = text.strip()
    while len(text) >= 2 and text[0] in _WRAPPING_QUOTES and text[-1] in _WRAPPING_QUOTES:
        text = text[1:-1].strip()
    return text


def clean_question_text(raw: str) -> str:
    """Unwraps JSON/object answers, quote wrapping, and a leading question label."""
    text = (raw or "").strip()
    try:
        value = recover_json(text)
    except NotRecoverable:
        value = None
    if isinstance(value, dict):
        for key, item in value.items():
            if re.fullmatch(r"question", key, re.IGNORECASE) and isinstance(item, str):
                text = item.strip()
                break
    text = _QUESTION_LABEL.sub("", text)
    return _strip_wrapping(text)


def generate_question(kp: KnowledgePoint, gateway: LlmGateway, model: str) -> str:
    """Kind-appropriate question for one knowledge point."""
    lang = language(kp.language)
    primary = primary_topic(kp.topic_path[0])
    if kp.kind == "differential":
        prompt = render_named(
            "question_differential",
            primary_topic=primary.name,
            target_language=lang.name,
            knowledge=kp.knowledge,
            differ=kp.differ or "",
        )
    else:
        prompt = render_named("question_unique", target_language=lang.name, knowledge=kp.knowledge)
    resp = gateway.complete(
        ChatRequest.user(
            model, prompt, temperature=GENERATION_TEMPERATURE, max_tokens=QUESTION_MAX_TOKENS,
            tag=f"question:{kp.keyword}:{kp.index}",
        )
    )
    question = clean_question_text(resp.content)
    if not question:
        raise EmptyGeneration(f"empty question for {kp.keyword!r} point {kp.index}")
    return question


def generate_answer(
    question: str, kp: KnowledgePoint, country: str, primary_topic_name: str, gateway: LlmGateway, model: str
) -> str:
    """Expert-persona answer grounded in the knowledge point."""
    if not question.strip():
        raise EmptyGeneration("cannot answer an empty question")
    lang = language(kp.language)
    prompt = render_named(
        "answer_generation",
        primary_topic=primary_topic_name,
        country=country,
        knowledge=kp.knowledge_text(),
        question=question,
        target_language=lang.name,
    )
    resp = gateway.complete(
        ChatRequest.user(
            model, prompt, temperature=GENERATION_TEMPERATURE, max_tokens=ANSWER_MAX_TOKENS,
            tag=f"answer:{kp.keyword}:{kp.index}",
        )
    )
    answer = _strip_wrapping(resp.content)
    if not answer:
        raise EmptyGeneration(f"empty answer for {kp.keyword!r} point {kp.index}")
    return answer


def _script_class(ch: str) -> str | None:
    if not ch.isalpha():
        return None
    name = unicodedata.name(ch, "")
    if name.startswith("LATIN"):
        return "latin"
    if name.startswith("ARABIC"):
        return "arabic"
    if name.startswith("HANGUL"):
        return "hangul"
    if name.startswith(("HIRAGANA", "KATAKANA")):
        return "kana"
    if name.startswith("CJK"):
        return "han"
    return "other"

_EXPECTED_SCRIPTS = {
    "ar": {"arabic"},
    "es": {"latin"},
    "fr": {"latin"},
    "pt": {"latin"},
    "ja": {"kana", "han"},
    "ko": {"hangul", "han"},
    "zh": {"han"},
}


def _script_mismatch(text: str, lang_code: str) -> bool:
    counts: dict[str, int] = {}
    for ch in text:
        cls = _script_class(ch)
        if cls:
            counts[cls] = counts.get(cls, 0) + 1
    total = sum(counts.values())
    if total == 0:
        return False
    expected = _EXPECTED_SCRIPTS[lang_code]
    share = sum(n for cls, n in counts.items() if cls in expected) / total
    return share < 0.5


def _is_latin_name(name: str) -> bool:
    return all(ord(ch) < 0x370 for ch in name)


def validate_qa(qa: QAPair, country_names: dict[str, list[str]] | None = None) -> list[Violation]:
    """Pure, deterministic structural checks; violations are data."""
    names = country_names if country_names is not None else load_country_names()
    violations: list[Violation] = []

    for label, text in (("question", qa.question), ("answer", qa.answer)):
        if not text.strip():
            violations.append(Violation("empty_text", label))

    haystack = f"{qa.question}\n{qa.answer}"
    lowered = haystack.lower()
    # Latin names must not sit inside a larger Latin word ("Japanese" is fine);
    # adjacency to non-Latin scripts still counts as a mention.
    latin_letter = r"[a-zà-öø-ÿ]"
    for country_list in names.values():
        for name in country_list:
            if _is_latin_name(name):
                pattern = rf"(?<!{latin_letter}){re.escape(name.lower())}(?!{latin_letter})"
                if re.search(pattern, lowered):
                    violations.append(Violation("country_name_mentioned", name))
            elif name in haystack:
                violations.append(Violation("country_name_mentioned", name))

    for phrase in REFUSAL_PHRASES:
        if phrase in lowered:
            violations.append(Violation("refusal_detected", phrase))
            break

    for label, text in (("question", qa.question), ("answer", qa.answer)):
        if text.strip() and _script_mismatch(text, qa.language):
            violations.append(Violation("language_mismatch", label))

    return violations


def synthesize_pair(
    kp: KnowledgePoint,
    gateway: LlmGateway,
    model: str,
    country_names: dict[str, list[str]],
) -> QAPair:
    """Question then answer for one point; status reflects the validator verdict."""
    lang = language(kp.language)
    primary = primary_topic(kp.topic_path[0])
    question = generate_question(kp, gateway, model)
    answer = generate_answer(question, kp, lang.country, primary.name, gateway, model)
    pair = QAPair.build(
        language=kp.language,
        topic_path=kp.topic_path,
        keyword=kp.keyword,
        question=question,
        answer=answer,
        setting=kp.kind,
        provenance=(kp.page_title, kp.page_url, kp.index),
        status="raw",
    )
    if not validate_qa(pair, country_names):
        pair = pair.with_status("validated")
    return pair


def run_synthesis(
    points: list[KnowledgePoint],
    gateway: LlmGateway,
    model: str,
    concurrency: int = 8,
    failure_log: Path | str | None = None,
) -> tuple[list[QAPair], dict[str, int]]:
    """One QA pair per knowledge point, bounded parallelism, deterministic order."""
    country_names = load_country_names()
    todo = [kp for kp in points if kp.keyword.lower() not in KEYWORD_DENYLIST]

    failures: list[dict] = []

    def _one(kp: KnowledgePoint) -> QAPair | None:
        try:
            return synthesize_pair(kp, gateway, model, country_names)
        except EmptyGeneration as exc:
            failures.append({
                "page_ref": {"title": kp.page_title, "url": kp.page_url},
                "keyword": kp.keyword,
                "index": kp.index,
                "reason": str(exc),
            })
            return None

    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        results = list(pool.map(_one, todo))

    pairs = [pair for pair in results if pair is not None]
    counts = {
        "knowledge_points": len(points),
        "qa_raw": len(pairs),
        "qa_validated": sum(1 for p in pairs if p.status == "validated"),
        "generation_failures": len(failures),
    }
    if failures and failure_log is not None:
        with open(failure_log, "a", encoding="utf-8") as fh:
            for failure in failures:
                fh.write(json.dumps(failure, ensure_ascii=False) + "\n")
    return pairs, counts
