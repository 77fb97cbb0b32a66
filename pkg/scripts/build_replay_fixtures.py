#!/usr/bin/env python3
"""Regenerates the bundled replay fixtures under tests/fixtures/e2e/.

Runs every pipeline stage in record mode against a deterministic scripted
provider, so the committed cache replays the whole chain offline. Re-run this
whenever prompt templates, stage decoding parameters, or model names in the
fixture config change.
"""

from __future__ import annotations

import json
import shutil
import sys
from pathlib import Path

from culturebench import assembly, evaluation, extraction, retrieval, synthesis
from culturebench.core import load_universal_taxonomy, validate_taxonomy
from culturebench.expansion import expand_all
from culturebench.gateway import ChatRequest, GatewayConfig, LlmGateway, scripted_transport

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "e2e"

GENERATOR = "gen-model"
BASELINE = "baseline-model"
TARGET = "target-model"
JUDGES = ["judge-alpha", "judge-beta"]
SEED = 20240513
LANGS = ("ja", "fr")

PAGES = [
    {
        "title": "花札",
        "lang": "ja",
        "url": "https://ja.fixture/hanafuda",
        "content": (
            "花札は四十八枚の札を用いる伝統的な札遊びである。札には十二か月の草花が描かれ、"
            "正月に家族で遊ばれることが多い。\n\n== 遊び方 ==\nこいこいや花合わせなどの遊び方が知られる。\n\n"
            "== References ==\n[1] 出典"
        ),
    },
    {
        "title": "Hanafuda",
        "lang": "en",
        "url": "https://en.fixture/hanafuda",
        "content": (
            "Hanafuda are traditional playing cards used for several matching games. "
            "The most popular game, koi-koi, rewards forming scoring combinations.\n\n"
            "== References ==\n[1] source"
        ),
    },
    {
        "title": "けん玉",
        "lang": "ja",
        "url": "https://ja.fixture/kendama",
        "content": (
            "けん玉は木製の玉と剣からなる伝統玩具である。級位や段位の検定が行われ、"
            "technique の数は一万を超えるとされる。\n\n== References ==\n[1] 出典"
        ),
    },
    {
        "title": "Kendama",
        "lang": "en",
        "url": "https://en.fixture/kendama",
        "content": (
            "The kendama is a traditional wooden skill toy consisting of a ball and a handle. "
            "Graded examinations progress from basic cup catches to advanced tricks.\n\n"
            "== References ==\n[1] source"
        ),
    },
    {
        "title": "Fromage",
        "lang": "fr",
        "url": "https://fr.fixture/fromage",
        "content": (
            "Le fromage occupe une place centrale dans les repas traditionnels, "
            "souvent servi entre le plat principal et le dessert.\n\n"
            "== Références ==\n[1] source"
        ),
    },
    {
        "title": "Cheese course",
        "lang": "en",
        "url": "https://en.fixture/fromage",
        "content": (
            "A cheese course, known locally as the fromage course, is served before dessert. "
            "Many regional cheeses carry protected designations of origin.\n\n"
            "== References ==\n[1] source"
        ),
    },
    {
        "title": "Baguette de tradition",
        "lang": "fr",
        "url": "https://fr.fixture/baguette",
        "content": (
            "La baguette de tradition est encadrée par un décret qui limite ses ingrédients "
            "à la farine, l'eau, le sel et la levure.\n\n== Références ==\n[1] source"
        ),
    },
    {
        "title": "Artisan bakery",
        "lang": "en",
        "url": "https://en.fixture/baguette",
        "content": (
            "An artisan bakery, or boulangerie, must knead and bake its baguette production "
            "on the premises to use the title.\n\n== References ==\n[1] source"
        ),
    },
]

EXPANSIONS = {
    ("Japan", "Recreation, Sports, and Entertainment - Games"): "1. Traditional Games — Hanafuda, Kendama",
    ("France", "Social Sciences - Food, Beverage, and Culinary Arts"): "1. Gastronomie — Fromage, Baguette",
}

TRANSLATIONS = {
    ("Hanafuda", "Japanese"): "花札",
    ("Kendama", "Japanese"): "けん玉",
    ("Fromage", "French"): "fromage",
    ("Baguette", "French"): "baguette",
}

CLASSIFICATIONS = {"Hanafuda": "A", "Kendama": "B", "Fromage": "A", "Baguette": "B"}

EXTRACTIONS = {
    "(Title: 花札)": json.dumps(
        [
            {
                "knowledge1": "花札は四十八枚の札で遊ぶ伝統的な札遊びで、正月に親しまれている。",
                "differ1": "ほかの地域では五十二枚のトランプが主流で、札に季節の絵柄はない。",
            },
            {
                "knowledge2": "花札の札には十二か月の草花が描かれている。",
                "differ2": "ほかの地域では札の図柄は数字と記号が中心である。",
            },
        ],
        ensure_ascii=False,
    ),
    "(Title: Hanafuda)": json.dumps(
        [
            {
                "knowledge1": "「こいこい」では役を作って得点を競い、続けるか止めるかの駆け引きが醍醐味とされる。",
                "differ1": "ほかの地域の札遊びは役比べよりも手札の強さを競うものが多い。",
            }
        ],
        ensure_ascii=False,
    ),
    "(Title: けん玉)": json.dumps(
        [
            {"knowledge1": "けん玉は木製の玉と剣で遊ぶ伝統玩具で、級位や段位の検定がある。"},
            {"knowledge2": "けん玉の技は一万種類以上あるとされ、世界大会も開かれている。"},
        ],
        ensure_ascii=False,
    ),
    "(Title: Kendama)": json.dumps(
        [{"knowledge1": "けん玉検定では大皿や中皿など基本技から順に審査される。"}],
        ensure_ascii=False,
    ),
    "(Title: Fromage)": json.dumps(
        [
            {
                "knowledge1": "Le fromage occupe une place centrale dans les repas, souvent servi entre le plat et le dessert.",
                "differ1": "Ailleurs, le fromage est plutôt un ingrédient de cuisine qu'un plat à part entière.",
            }
        ],
        ensure_ascii=False,
    ),
    "(Title: Cheese course)": json.dumps(
        [
            {
                "knowledge1": "Certains fromages bénéficient d'une appellation d'origine protégée liée à un terroir précis.",
                "differ1": "Ailleurs, les appellations d'origine restent rares pour les produits laitiers.",
            }
        ],
        ensure_ascii=False,
    ),
    "(Title: Baguette de tradition)": json.dumps(
        [
            {
                "knowledge1": "La baguette de tradition est encadrée par un décret qui limite ses ingrédients à la farine, l'eau, le sel et la levure.",
            }
        ],
        ensure_ascii=False,
    ),
    "(Title: Artisan bakery)": json.dumps(
        [{"knowledge1": "Une boulangerie artisanale doit pétrir et cuire le pain sur place pour porter ce titre."}],
        ensure_ascii=False,
    ),
}

# knowledge snippet -> generated question
QUESTIONS = {
    "花札は四十八枚の札で遊ぶ伝統的な札遊びで": "お正月に家族で楽しめる伝統的な札遊びにはどんなものがありますか？",
    "花札の札には十二か月の草花が描かれている": "札に描かれた絵柄から季節を感じられる遊びについて教えてください。",
    "「こいこい」では役を作って得点を競い": "役作りと駆け引きが楽しめる伝統的な札遊びを教えてください。",
    "けん玉は木製の玉と剣で遊ぶ伝統玩具で": "木製の玉と剣を使う伝統玩具の楽しみ方を教えてください。",
    "けん玉の技は一万種類以上あるとされ": "伝統玩具の技を上達させるにはどんな練習がよいですか？",
    "けん玉検定では大皿や中皿など基本技から順に審査される": "伝統玩具の検定ではどのような技が審査されますか？",
    "Le fromage occupe une place centrale dans les repas": "Comment composer un plateau de fromages pour un dîner traditionnel ?",
    "Certains fromages bénéficient d'une appellation d'origine protégée": "À quoi servent les appellations d'origine pour les produits laitiers ?",
    "La baguette de tradition est encadrée par un décret": "Quelles sont les règles à respecter pour préparer un pain de tradition ?",
    "Une boulangerie artisanale doit pétrir et cuire le pain sur place": "Qu'est-ce qui distingue une boulangerie artisanale d'un simple point de vente ?",
}

# question -> expert answer
ANSWERS = {
    "お正月に家族で楽しめる伝統的な札遊びにはどんなものがありますか？": (
        "四十八枚の札を使う花札が代表的です。札には十二か月の草花が描かれており、"
        "「こいこい」や「花合わせ」といった遊び方で、お正月に家族そろって楽しまれています。"
    ),
    "札に描かれた絵柄から季節を感じられる遊びについて教えてください。": (
        "十二か月それぞれの草花、たとえば一月の松や三月の桜が描かれた札を使う花札が挙げられます。"
        "絵柄を眺めるだけでも季節の移ろいを感じられます。"
    ),
    "役作りと駆け引きが楽しめる伝統的な札遊びを教えてください。": (
        "「こいこい」が代表的です。手札と場の札を合わせて役を作り、さらに続けるか勝負を止めるかを選ぶ"
        "駆け引きに醍醐味があります。"
    ),
    "木製の玉と剣を使う伝統玩具の楽しみ方を教えてください。": (
        "けん玉が親しまれています。大皿や小皿に玉を乗せる基本技から始め、慣れてきたら検定で"
        "級位や段位に挑戦すると上達の目安になります。"
    ),
    "伝統玩具の技を上達させるにはどんな練習がよいですか？": (
        "基本の持ち方と膝の使い方を身につけることが第一歩です。技は一万種類以上あるとされるため、"
        "皿系の基本技を安定させてから応用に進むのが近道です。"
    ),
    "伝統玩具の検定ではどのような技が審査されますか？": (
        "検定では大皿や中皿、小皿といった基本技から始まり、段位が上がるにつれて灯台やうぐいすなどの"
        "高度な技が審査されます。"
    ),
    "Comment composer un plateau de fromages pour un dîner traditionnel ?": (
        "Un plateau équilibré associe une pâte molle, une pâte pressée et un bleu, servi entre le plat "
        "principal et le dessert avec un pain de campagne."
    ),
    "À quoi servent les appellations d'origine pour les produits laitiers ?": (
        "Les appellations d'origine garantissent qu'un produit laitier provient d'un terroir précis et "
        "respecte un cahier des charges strict, du lait à l'affinage."
    ),
    "Quelles sont les règles à respecter pour préparer un pain de tradition ?": (
        "Un pain de tradition ne peut contenir que quatre ingrédients : farine, eau, sel et levure ou levain, "
        "sans additif ni surgélation de la pâte."
    ),
    "Qu'est-ce qui distingue une boulangerie artisanale d'un simple point de vente ?": (
        "Une boulangerie artisanale pétrit, façonne et cuit le pain sur place, tandis qu'un point de vente "
        "se contente de réchauffer des pâtons fabriqués ailleurs."
    ),
}


def scripted_model(req: ChatRequest) -> str:
    body = req.messages[0]["content"]
    tag = req.tag

    if tag.startswith("expand:"):
        for (country, pair_line), response in EXPANSIONS.items():
            if f"in {country}" in body and pair_line in body:
                return response
        return "None"

    if tag.startswith("translate:"):
        for (keyword, lang_name), translated in TRANSLATIONS.items():
            if f'"{keyword}"' in body and lang_name in body:
                return translated
        raise AssertionError(f"no translation scripted for: {body!r}")

    if tag.startswith("relevance:"):
        return "Yes"

    if tag.startswith("classify:"):
        keyword = tag.split(":", 1)[1]
        return CLASSIFICATIONS[keyword]

    if tag.startswith("extract-"):
        for marker, response in EXTRACTIONS.items():
            if marker in body:
                return response
        raise AssertionError(f"no extraction scripted for tag {tag}")

    if tag.startswith("question:"):
        for snippet, question in QUESTIONS.items():
            if snippet in body:
                return question
        raise AssertionError(f"no question scripted for tag {tag}")

    if tag.startswith("answer:"):
        for question, answer in ANSWERS.items():
            if question in body:
                return answer
        raise AssertionError(f"no answer scripted for tag {tag}")

    if tag.startswith("respond:"):
        model = tag.split(":")[1]
        question = body.strip()
        prefix = "TGT" if model == TARGET else "BSL"
        return f"{prefix} — réponse du modèle à : {question}"

    if tag.startswith("judge:") or tag.startswith("judge-flip:"):
        judge = tag.split(":")[1]
        question = body.split("[User Question]\n", 1)[1].split("\n", 1)[0]
        a_section = body.split("[The Start of Assistant A's Answer]", 1)[1].split(
            "[The End of Assistant A's Answer]", 1
        )[0]
        target_letter = "A" if "TGT" in a_section else "B"
        baseline_letter = "B" if target_letter == "A" else "A"
        if "検定" in question:
            return f"Both answers are close to the reference. [[C]]"
        if judge == "judge-beta" and "plateau de fromages" in question:
            return f"Assistant {baseline_letter} stays closer to the reference. [[{baseline_letter}]]"
        return f"Assistant {target_letter} matches the reference better. [[{target_letter}]]"

    raise AssertionError(f"unscripted request: tag={tag!r}")


def main() -> int:
    cache_dir = FIXTURE_DIR / "cache"
    pages_dir = FIXTURE_DIR / "pages"
    shutil.rmtree(cache_dir, ignore_errors=True)
    shutil.rmtree(pages_dir, ignore_errors=True)
    pages_dir.mkdir(parents=True)

    for i, page in enumerate(PAGES):
        (pages_dir / f"page_{i:02d}.json").write_text(json.dumps(page, ensure_ascii=False, indent=2), encoding="utf-8")

    config = {
        "gateway": {
            "mode": "replay",
            "cache_dir": "cache",
            "requests_per_minute": {"default": 1000000},
        },
        "models": {
            "generator": GENERATOR,
            "judges": JUDGES,
            "baseline": BASELINE,
            "targets": [TARGET],
        },
        "pipeline": {"topics_per_primary": 20},
        "source": {"type": "fixtures", "fixture_dir": "pages"},
    }
    (FIXTURE_DIR / "config.json").write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")

    gateway = LlmGateway(
        GatewayConfig(mode="record", cache_dir=str(cache_dir), requests_per_minute={"default": 1000000}),
        transport=scripted_transport(scripted_model),
        sleep=lambda s: None,
    )
    source = retrieval.FixtureSource(pages_dir)

    taxonomy = load_universal_taxonomy()
    for lang in LANGS:
        expand_all(taxonomy, lang, gateway, GENERATOR)
    assert validate_taxonomy(taxonomy) == []
    assert taxonomy.count_tertiaries("ja") == 1 and taxonomy.count_tertiaries("fr") == 1

    records = []
    for lang in LANGS:
        lang_records, counts = retrieval.run_retrieval(taxonomy, lang, source, gateway, GENERATOR)
        print(f"retrieval {lang}: {counts}")
        records.extend(lang_records)
    assert len(records) == 8, f"expected 8 kept pages, got {len(records)}"

    points, counts = extraction.run_extraction(records, gateway, GENERATOR)
    print(f"extraction: {counts}")
    assert len(points) == 10, f"expected 10 knowledge points, got {len(points)}"

    pairs, counts = synthesis.run_synthesis(points, gateway, GENERATOR)
    print(f"synthesis: {counts}")
    assert counts["qa_validated"] == 10, counts

    mini, maxi = assembly.split_pool(
        [p for p in pairs if p.status == "validated"],
        assembly.SplitSpec(topics_per_primary=20, seed=SEED, language_scope=LANGS),
    )
    assert len(mini) == 10 and maxi == []

    responses = evaluation.collect_responses(mini, [BASELINE, TARGET], gateway)
    assert len(responses) == 20

    verdicts = evaluation.run_judging(mini, responses, [TARGET], BASELINE, JUDGES, gateway, SEED)
    assert len(verdicts) == 20
    unparseable = sum(1 for v in verdicts if v.score is None)
    assert unparseable == 0

    n_cached = sum(1 for _ in cache_dir.rglob("*.json"))
    print(f"fixture cache entries: {n_cached}")
    print(f"fixtures written to {FIXTURE_DIR}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
