"""Acceptance gate: every release criterion at its pinned tolerance, offline.

Each test prints one ACCEPTANCE PASS/FAIL line via the conftest hook.
"""

from __future__ import annotations

import json
import random
import time
from fractions import Fraction
from pathlib import Path

import pytest
from click.testing import CliRunner

from culturebench.annotation.store import AcceptanceTable
from culturebench.assembly import SplitSpec, compute_stats, split_pool
from culturebench.cli import main as cli_main
from culturebench.core import QAPair, Taxonomy, qa_id, read_pool
from culturebench.evaluation import (
    EvalTally,
    JudgeVerdict,
    aggregate,
    net_win_rate,
    parse_verdict,
    score_for_target,
    tally_verdicts,
)
from culturebench.extraction import NotRecoverable, recover_json

FIXTURES = Path(__file__).parent / "fixtures" / "e2e"

# ---------------------------------------------------------------------------
# Criterion: metric oracle equivalence (exact rational arithmetic, < 1 s)
# ---------------------------------------------------------------------------


def _verdict(score: int | None, qa_id_: str, lang: str = "ja", primary: str = "RSE") -> JudgeVerdict:
    raw = {1: "A", -1: "B", 0: "C", None: "unparseable"}[score]
    return JudgeVerdict(
        qa_id=qa_id_,
        target_model="t",
        baseline_model="b",
        judge_model="j",
        target_position="A",
        raw_verdict=raw,
        score=score,
        raw_text="",
        language=lang,
        topic_path=(primary, "S", "T"),
    )


def _expand_tally(tally: EvalTally, lang: str = "ja", primary: str = "RSE", start: int = 0) -> list[JudgeVerdict]:
    out = []
    n = start
    for score, count in ((1, tally.n_target_wins), (-1, tally.n_baseline_wins), (0, tally.n_ties), (None, tally.n_unparseable)):
        for _ in range(count):
            out.append(_verdict(score, f"qa{n}", lang, primary))
            n += 1
    return out


def test_metric_oracle_equivalence_1000_random_tallies():
    rng = random.Random(20240513)
    elapsed = 0.0
    for _ in range(1000):
        tally = EvalTally(rng.randint(0, 40), rng.randint(0, 40), rng.randint(0, 40), rng.randint(0, 5))
        if tally.n_total == 0:
            tally = EvalTally(1, 0, 0, 0)
        verdicts = _expand_tally(tally)
        start = time.perf_counter()
        rate = net_win_rate(tally_verdicts(verdicts))
        elapsed += time.perf_counter() - start
        # independent brute-force recount of the verdict list
        numerator = 0
        for v in verdicts:
            if v.score == 1:
                numerator += 1
            elif v.score == -1:
                numerator -= 1
        oracle = Fraction(numerator, len(verdicts))
        assert rate == oracle  # exact, zero tolerance
    assert elapsed < 1.0


# ---------------------------------------------------------------------------
# Criterion: Table 4 cell reproduction (81.48 +/- 0.005; weighted identity exact)
# ---------------------------------------------------------------------------

PUBLISHED_AR_CELL = 81.48
PUBLISHED_WEIGHTED_AVERAGE = 76.31
PUBLISHED_LANGUAGE_RATES = {
    "ar": Fraction(8148, 10000),
    "zh": Fraction(7977, 10000),
    "fr": Fraction(7915, 10000),
    "ja": Fraction(6627, 10000),
    "ko": Fraction(6736, 10000),
    "pt": Fraction(7462, 10000),
    "es": Fraction(8606, 10000),
}


def test_table4_cell_and_weighted_average_identity():
    tally = EvalTally(n_target_wins=2037, n_baseline_wins=0, n_ties=463, n_unparseable=0)
    rate = net_win_rate(tally)
    assert rate == Fraction(2037, 2500)
    assert round(float(rate * 100), 2) == pytest.approx(PUBLISHED_AR_CELL, abs=0.005)

    verdicts = []
    start = 0
    for lang, lang_rate in PUBLISHED_LANGUAGE_RATES.items():
        verdicts += _expand_tally(
            EvalTally(lang_rate.numerator, 0, lang_rate.denominator - lang_rate.numerator, 0), lang=lang, start=start
        )
        start += 10**5
    cells, overall = aggregate(verdicts, "language")
    assert overall.net_win_rate == net_win_rate(tally_verdicts(verdicts))  # pooled identity, exact
    assert float(overall.net_win_rate * 100) == pytest.approx(PUBLISHED_WEIGHTED_AVERAGE, abs=0.5)

    rng = random.Random(7)
    for _ in range(25):
        verdicts = []
        start = 0
        for lang in ("ar", "es", "fr", "ja", "ko", "pt", "zh")[: rng.randint(1, 7)]:
            tally = EvalTally(rng.randint(0, 30), rng.randint(0, 30), rng.randint(0, 30), rng.randint(0, 4))
            if tally.n_total == 0:
                tally = EvalTally(1, 0, 0, 0)
            verdicts += _expand_tally(tally, lang=lang, start=start)
            start += 1000
        _, overall = aggregate(verdicts, "language")
        assert overall.net_win_rate == net_win_rate(tally_verdicts(verdicts))


# ---------------------------------------------------------------------------
# Criterion: Table 1 reproduction (+/- 0.05 after one-decimal rounding)
# ---------------------------------------------------------------------------

TABLE1_PER_ANNOTATOR = {
    "clarity": {
        "ar": (85.8, 100.0), "zh": (98.3, 99.2), "fr": (85.8, 100.0), "ja": (95.0, 100.0),
        "ko": (98.3, 100.0), "pt": (85.0, 100.0), "es": (93.3, 100.0),
    },
    "relevance": {
        "ar": (72.8, 70.0), "zh": (92.4, 92.4), "fr": (87.6, 75.0), "ja": (90.4, 87.5),
        "ko": (67.8, 66.7), "pt": (92.2, 90.0), "es": (98.2, 91.7),
    },
    "answer_quality": {
        "ar": (100.0, 100.0), "zh": (95.8, 100.0), "fr": (99.0, 98.3), "ja": (98.2, 97.5),
        "ko": (100.0, 100.0), "pt": (99.0, 99.2), "es": (97.3, 98.3),
    },
}

TABLE1_AVERAGE_ROWS = {
    "clarity": {"ar": 92.9, "zh": 98.8, "fr": 92.9, "ja": 97.5, "ko": 99.2, "pt": 92.5, "es": 96.7},
    "relevance": {"ar": 71.4, "zh": 92.4, "fr": 81.3, "ja": 89.0, "ko": 67.3, "pt": 91.1, "es": 95.0},
    "answer_quality": {"ar": 100.0, "zh": 97.9, "fr": 98.7, "ja": 97.9, "ko": 100.0, "pt": 99.1, "es": 97.8},
}

TABLE1_OVERALL = {"clarity": 95.8, "relevance": 83.9, "answer_quality": 98.8}
TABLE1_ANNOTATOR_OVERALL = {
    "clarity": (91.6, 99.9),
    "relevance": (85.9, 81.9),
    "answer_quality": (98.5, 99.0),
}


def test_table1_average_rows_reproduced():
    table = AcceptanceTable.from_rates(TABLE1_PER_ANNOTATOR)
    exported = table.to_dict()["dimensions"]
    for dimension, row in TABLE1_AVERAGE_ROWS.items():
        for lang, published in row.items():
            got = exported[dimension]["language_average"][lang]
            assert got == pytest.approx(published, abs=0.05), (dimension, lang, got, published)
        for role, published in zip(("A", "B"), TABLE1_ANNOTATOR_OVERALL[dimension]):
            assert exported[dimension]["annotator_overall"][role] == pytest.approx(published, abs=0.05)
        assert exported[dimension]["overall"] == pytest.approx(TABLE1_OVERALL[dimension], abs=0.05)


# ---------------------------------------------------------------------------
# Criterion: Table 8 reproduction (mean of 14 rows = 85.05 +/- 0.005)
# ---------------------------------------------------------------------------

TABLE8_AGREEMENT_ROWS = [
    81.13, 70.21, 75.08, 70.35, 78.38, 86.89, 97.06, 85.15, 90.96, 97.53, 97.08, 84.60, 82.86, 93.42,
]


def test_table8_average_agreement():
    assert len(TABLE8_AGREEMENT_ROWS) == 14
    mean = sum(Fraction(str(r)) for r in TABLE8_AGREEMENT_ROWS) / 14
    assert float(mean) == pytest.approx(85.05, abs=0.005)


# ---------------------------------------------------------------------------
# Criterion: split properties over 200 random pools (< 10 s)
# ---------------------------------------------------------------------------


def _random_pool(rng: random.Random) -> list[QAPair]:
    langs = rng.sample(["ar", "es", "fr", "ja", "ko", "pt", "zh"], rng.randint(1, 4))
    primaries = rng.sample(["SS", "PP", "RT", "PS", "LAW", "EDU", "LAN", "LIT", "MED", "AST", "ART", "RSE"], rng.randint(1, 5))
    pool = []
    for lang in langs:
        for primary in primaries:
            for t in range(rng.randint(1, 8)):
                for n in range(rng.randint(1, 3)):
                    pool.append(
                        QAPair.build(
                            language=lang,
                            topic_path=(primary, f"S-{primary}", f"T{t}"),
                            keyword=f"k{t}",
                            question=f"q {lang} {primary} {t} {n}?",
                            answer=f"a {lang} {primary} {t} {n}.",
                            setting="unique",
                            provenance=("t", "u", 1),
                            status="validated",
                        )
                    )
    return pool


def test_split_properties_200_random_pools():
    rng = random.Random(987654321)
    started = time.perf_counter()
    for trial in range(200):
        pool = _random_pool(rng)
        spec = SplitSpec(topics_per_primary=rng.randint(1, 6), seed=rng.randint(0, 2**63))
        mini, maxi = split_pool(pool, spec)
        again = split_pool(list(reversed(pool)), spec)
        # determinism, input-order independence
        assert [p.id for p in mini] == [p.id for p in again[0]]
        assert [p.id for p in maxi] == [p.id for p in again[1]]
        # partition (exact set checks)
        assert sorted([p.id for p in mini] + [p.id for p in maxi]) == sorted(p.id for p in pool)
        assert not {p.id for p in mini} & {p.id for p in maxi}
        # per-language tertiary disjointness against a brute-force oracle
        for lang in {p.language for p in pool}:
            mini_topics = {p.topic_path for p in mini if p.language == lang}
            max_topics = {p.topic_path for p in maxi if p.language == lang}
            assert mini_topics & max_topics == set()
        # drawn-topic completeness: every pair under a drawn topic is in mini
        drawn = {(p.language, p.topic_path) for p in mini}
        for pair in pool:
            if (pair.language, pair.topic_path) in drawn:
                assert pair.id in {p.id for p in mini}
    assert time.perf_counter() - started < 10.0


# ---------------------------------------------------------------------------
# Criterion: antisymmetry suite (exact negation of every cell)
# ---------------------------------------------------------------------------


def _mirror(verdict: JudgeVerdict) -> JudgeVerdict:
    flipped = "B" if verdict.target_position == "A" else "A"
    score = None if verdict.raw_verdict == "unparseable" else score_for_target(verdict.raw_verdict, flipped)
    return JudgeVerdict(
        qa_id=verdict.qa_id,
        target_model=verdict.baseline_model,
        baseline_model=verdict.target_model,
        judge_model=verdict.judge_model,
        target_position=flipped,
        raw_verdict=verdict.raw_verdict,
        score=score,
        raw_text=verdict.raw_text,
        language=verdict.language,
        topic_path=verdict.topic_path,
    )


def test_antisymmetry_negates_every_cell():
    rng = random.Random(20240513)
    verdicts = []
    start = 0
    for lang in ("ar", "fr", "ja", "zh"):
        for primary in ("RSE", "ART", "LAW"):
            tally = EvalTally(rng.randint(0, 12), rng.randint(0, 12), rng.randint(0, 12), rng.randint(0, 2))
            if tally.n_total == 0:
                tally = EvalTally(1, 0, 0, 0)
            verdicts += _expand_tally(tally, lang=lang, primary=primary, start=start)
            start += 100
    mirrored = [_mirror(v) for v in verdicts]
    for group_by in ("language", "topic", "language_topic"):
        cells, overall = aggregate(verdicts, group_by)
        m_cells, m_overall = aggregate(mirrored, group_by)
        assert {c.group: c.net_win_rate for c in m_cells} == {c.group: -c.net_win_rate for c in cells}
        assert m_overall.net_win_rate == -overall.net_win_rate


# ---------------------------------------------------------------------------
# Criterion: parser suites (verdict decoys; JSON recovery >= 90% of noisy set)
# ---------------------------------------------------------------------------

ADVERSARIAL_VERDICT_FIXTURES = [
    ("Verdict: [[A]]", "A"),
    ("Verdict: [[B]]", "B"),
    ("Verdict: [[C]]", "C"),
    ('the format is "[[A]]" if A wins, "[[B]]" if B, "[[C]]" for ties. I pick [[B]]', "B"),
    ('"[[A]]"/"[[B]]"/"[[C]]" as instructed … final verdict: [[C]]', "C"),
    ("[[A]] early, later reversed: [[B]]", "B"),
    ("[[C]][[B]][[A]]", "A"),
    ("nested [[[B]]] brackets", "B"),
    ("Assistant A is better.", "unparseable"),
    ("[A] single brackets", "unparseable"),
    ("[[D]]", "unparseable"),
    ("[[a]]", "unparseable"),
    ("[[ C ]]", "unparseable"),
    ("[[AB]]", "unparseable"),
    ("", "unparseable"),
    ("multi\nline\nfinal: [[A]]", "A"),
    ("final answer:[[C]]", "C"),
    ("I choose neither… wait, [[B]].", "B"),
    ("tie [[C]] declared, evidence reviewed, still [[C]]", "C"),
    ("matrix of [[A]] vs [[B]] comparisons ends [[A]]", "A"),
    ("Both answers restate the reference. [[C]]", "C"),
    ("…therefore [[B]]", "B"),
]

NOISY_JSON_FIXTURES = [
    ('```json\n[{"knowledge1": "a"}]\n```', [{"knowledge1": "a"}]),
    ('```\n{"knowledge1": "b"}\n```', {"knowledge1": "b"}),
    ('Here are the results: [{"knowledge1": "c"}]', [{"knowledge1": "c"}]),
    ('[{"knowledge1": "d"}] Hope this helps!', [{"knowledge1": "d"}]),
    ('Sure! ```json\n[{"knowledge1": "e"}]``` as requested', [{"knowledge1": "e"}]),
    ('[{"knowledge1": "f",}]', [{"knowledge1": "f"}]),
    ('{"knowledge1": "g",}', {"knowledge1": "g"}),
    ('{"knowledge1": "line\nbreak"}', {"knowledge1": "line\nbreak"}),
    ('[{"knowledge1": "h"}, {"knowledge2": "i"},]', [{"knowledge1": "h"}, {"knowledge2": "i"}]),
    ('prefix {"knowledge1": "j"} suffix', {"knowledge1": "j"}),
    ('The JSON is:\n\n[{"knowledge1": "k"}]\n\nDone.', [{"knowledge1": "k"}]),
    ('```JSON\n[{"knowledge1": "l"}]\n```', [{"knowledge1": "l"}]),
    ('- bullet then [{"knowledge1": "m"}]', [{"knowledge1": "m"}]),
    ('[{"knowledge1": "n"}]\n[duplicate ignored]', [{"knowledge1": "n"}]),
    ('{"outer": {"knowledge1": "o"}}', {"outer": {"knowledge1": "o"}}),
    ('text {"knowledge1": "p", "differ1": "q"} more text', {"knowledge1": "p", "differ1": "q"}),
    ('```json\n{"knowledge1": "r",\n "differ1": "s"}\n```', {"knowledge1": "r", "differ1": "s"}),
    ('[\n  {"knowledge1": "t"}\n]', [{"knowledge1": "t"}]),
    ('Answer:\n[{"knowledge1": "u"},{"knowledge2": "v"}]', [{"knowledge1": "u"}, {"knowledge2": "v"}]),
    ('"[" is not json but this is: {"knowledge1": "w"}', {"knowledge1": "w"}),
    ('[{"knowledge1": "x"} , {"knowledge2": "y"} ]', [{"knowledge1": "x"}, {"knowledge2": "y"}]),
    ('json```[{"knowledge1": "z"}]```', [{"knowledge1": "z"}]),
    ('object with tab {"knowledge1": "a\tb"}', {"knowledge1": "a\tb"}),
    ('unicode untouched {"knowledge1": "花札"}', {"knowledge1": "花札"}),
    ('escaped stays escaped {"knowledge1": "a\\nb"}', {"knowledge1": "a\nb"}),
    ('double fence ```json\n[]\n``` then ```json\n[{"knowledge1": "kept"}]\n```', []),
    ('[{"knowledge1": "aa", "extra": 1}]', [{"knowledge1": "aa", "extra": 1}]),
    ('deep [[{"knowledge1": "bb"}]]', [[{"knowledge1": "bb"}]]),
    ('{"knowledge1": ""}', {"knowledge1": ""}),
    ('  \n [{"knowledge1": "cc"}]  \n', [{"knowledge1": "cc"}]),
]


def test_parser_suites_verdicts_and_json_recovery():
    assert len(ADVERSARIAL_VERDICT_FIXTURES) >= 20
    for text, expected in ADVERSARIAL_VERDICT_FIXTURES:
        assert parse_verdict(text) == expected, text

    rng = random.Random(13)
    for _ in range(200):
        value = {"knowledge1": "".join(rng.choice("abc \n\t日本語") for _ in range(rng.randint(0, 20)))}
        text = json.dumps(value, ensure_ascii=rng.choice([True, False]))
        assert recover_json(text) == json.loads(text)  # equivalence on valid inputs

    assert len(NOISY_JSON_FIXTURES) == 30
    recovered = 0
    for text, expected in NOISY_JSON_FIXTURES:
        try:
            if recover_json(text) == expected:
                recovered += 1
        except NotRecoverable:
            pass
    assert recovered >= 27, f"only {recovered}/30 noisy fixtures recovered"


# ---------------------------------------------------------------------------
# Criterion: end-to-end replay over the bundled fixture cache (< 30 s)
# ---------------------------------------------------------------------------

E2E_STAGES = ["expand", "retrieve", "extract", "synthesize", "assemble", "collect-responses", "judge", "report"]


def _run_chain(out_dir: Path) -> None:
    runner = CliRunner()
    for stage in E2E_STAGES:
        result = runner.invoke(
            cli_main,
            [
                "--config", str(FIXTURES / "config.json"),
                "--out-dir", str(out_dir),
                "--mode", "replay",
                "--seed", "20240513",
                "--lang", "ja",
                "--lang", "fr",
                stage,
            ],
        )
        assert result.exit_code == 0, f"{stage} failed:\n{result.output}"


def test_end_to_end_replay_bundled_fixtures(tmp_path):
    started = time.perf_counter()
    run_a = tmp_path / "a"
    run_b = tmp_path / "b"
    _run_chain(run_a)
    _run_chain(run_b)
    assert time.perf_counter() - started < 30.0

    pool = read_pool(run_a / "qa_pool.jsonl")
    validated = [p for p in pool if p.status == "validated"]
    assert len(validated) > 0

    taxonomy = Taxonomy.load(run_a / "taxonomy.json")
    for pair in pool:
        assert pair.question.strip() and pair.answer.strip()
        assert pair.setting in ("differential", "unique")
        assert pair.status in ("raw", "validated", "annotated")
        assert taxonomy.resolves(pair.language, pair.topic_path), pair.topic_path
        assert pair.id == qa_id(pair.language, pair.question, pair.answer)
        assert pair.provenance[0] and pair.provenance[1] and pair.provenance[2] >= 1

    # byte-identical second run over every stage data output
    compared = 0
    for path_a in sorted(run_a.iterdir()):
        if path_a.name == "manifest.json":
            continue
        path_b = run_b / path_a.name
        assert path_b.exists(), path_a.name
        assert path_a.read_bytes() == path_b.read_bytes(), f"{path_a.name} differs between runs"
        compared += 1
    assert compared >= 10

    verdicts_file = (run_a / "verdicts.jsonl").read_text(encoding="utf-8").strip().splitlines()
    assert len(verdicts_file) > 0


# ---------------------------------------------------------------------------
# Criterion: Table 3 arithmetic (percentages +/- 0.05)
# ---------------------------------------------------------------------------

TABLE3_COUNTS = {"es": 2170, "fr": 2929, "pt": 1529, "ar": 1416, "zh": 4172, "ja": 3798, "ko": 3346}
TABLE3_PERCENTAGES = {"es": 11.2, "fr": 15.1, "pt": 7.9, "ar": 7.3, "zh": 21.5, "ja": 19.6, "ko": 17.3}


def test_table3_percentages_from_count_fixture():
    pool = []
    for lang, count in TABLE3_COUNTS.items():
        for i in range(count):
            pool.append(
                QAPair.build(
                    language=lang,
                    topic_path=("RSE", "Games", "T"),
                    keyword="k",
                    question=f"q {lang} {i}?",
                    answer=f"a {lang} {i}.",
                    setting="unique",
                    provenance=("t", "u", 1),
                    status="validated",
                )
            )
    stats = compute_stats(pool)
    assert stats.total_qa == 19360
    for lang, published in TABLE3_PERCENTAGES.items():
        assert stats.row(lang).percentage == pytest.approx(published, abs=0.05), lang
    assert sum(stats.row(lang).percentage for lang in TABLE3_COUNTS) == pytest.approx(100.0, abs=0.3)
