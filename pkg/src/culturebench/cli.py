"""Single entry point: every pipeline stage is a subcommand over a shared config and manifest.

Exit codes: 0 success, 2 config error, 3 missing input, 4 stage error.
"""

from __future__ import annotations

import json
import logging
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import click

from . import assembly, evaluation, extraction, retrieval, synthesis
from .annotation.service import create_app
from .annotation.store import AnnotationStore, sample_batch
from .core import (
    LANGUAGES,
    Taxonomy,
    load_universal_taxonomy,
    read_pool,
    validate_taxonomy,
    write_pool,
)
from .expansion import expand_all
from .gateway import GatewayConfig, LlmGateway
from .manifest import Manifest, MissingInput, require_input
from .prompts import set_default_prompt_dir

logger = logging.getLogger(__name__)

DEFAULT_SEED = 20240513

EXIT_CONFIG = 2
EXIT_MISSING_INPUT = 3
EXIT_STAGE = 4


class ConfigInvalid(ValueError):
    pass


@dataclass
class AppConfig:
    gateway: GatewayConfig
    generator_model: str = "generator"
    judge_models: list[str] = field(default_factory=lambda: ["judge"])
    baseline_model: str = "baseline"
    target_models: list[str] = field(default_factory=lambda: ["target"])
    pages_per_arm: int = retrieval.DEFAULT_PAGES_PER_ARM
    max_page_chars: int = retrieval.DEFAULT_MAX_PAGE_CHARS
    expansion_concurrency: int = 4
    retrieval_concurrency: int = 8
    synthesis_concurrency: int = 8
    judge_concurrency: int = 4
    topics_per_primary: int = 20
    cap_per_cell: int | None = None
    dual_pass: bool = False
    source_type: str = "mediawiki"
    fixture_dir: str | None = None
    user_agent: str = "culturebench/0.1 (benchmark pipeline)"
    annotation_log: str = "annotations.jsonl"
    annotation_tokens: dict[str, str] = field(default_factory=dict)
    annotation_static_dir: str | None = None
    annotation_batch_size: int = 120
    annotators: dict[str, list[str]] = field(default_factory=dict)  # language -> [a, b]
    prompt_dir: str | None = None
    snapshot: dict = field(default_factory=dict)


def load_config(path: str | None, mode_override: str | None) -> AppConfig:
    raw: dict = {}
    base = Path.cwd()
    if path is not None:
        config_path = Path(path)
        if not config_path.exists():
            raise ConfigInvalid(f"config file not found: {config_path}")
        try:
            raw = json.loads(config_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"config file is not valid JSON: {exc}") from exc
        base = config_path.parent.resolve()

    def _resolve(value: str | None) -> str | None:
        if value is None:
            return None
        p = Path(value)
        return str(p if p.is_absolute() else base / p)

    gateway_raw = dict(raw.get("gateway", {}))
    if mode_override:
        gateway_raw["mode"] = mode_override
    gateway_raw.setdefault("mode", "replay")
    if gateway_raw.get("cache_dir"):
        gateway_raw["cache_dir"] = _resolve(gateway_raw["cache_dir"])
    try:
        gateway = GatewayConfig.from_dict(gateway_raw)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(f"bad gateway config: {exc}") from exc
    if gateway.mode in ("record", "replay") and not gateway.cache_dir:
        raise ConfigInvalid(f"gateway mode {gateway.mode!r} requires gateway.cache_dir")

    models = raw.get("models", {})
    pipeline = raw.get("pipeline", {})
    source = raw.get("source", {})
    annotation = raw.get("annotation", {})

    judges = models.get("judges") or ([models["judge"]] if "judge" in models else ["judge"])
    config = AppConfig(
        gateway=gateway,
        generator_model=models.get("generator", "generator"),
        judge_models=list(judges),
        baseline_model=models.get("baseline", "baseline"),
        target_models=list(models.get("targets", ["target"])),
        pages_per_arm=int(pipeline.get("pages_per_arm", retrieval.DEFAULT_PAGES_PER_ARM)),
        max_page_chars=int(pipeline.get("max_page_chars", retrieval.DEFAULT_MAX_PAGE_CHARS)),
        expansion_concurrency=int(pipeline.get("expansion_concurrency", 4)),
        retrieval_concurrency=int(pipeline.get("retrieval_concurrency", 8)),
        synthesis_concurrency=int(pipeline.get("synthesis_concurrency", 8)),
        judge_concurrency=int(pipeline.get("judge_concurrency", 4)),
        topics_per_primary=int(pipeline.get("topics_per_primary", 20)),
        cap_per_cell=pipeline.get("cap_per_cell"),
        dual_pass=bool(pipeline.get("dual_pass", False)),
        source_type=source.get("type", "mediawiki"),
        fixture_dir=_resolve(source.get("fixture_dir")),
        user_agent=source.get("user_agent", "culturebench/0.1 (benchmark pipeline)"),
        annotation_log=annotation.get("event_log", "annotations.jsonl"),
        annotation_tokens=dict(annotation.get("tokens", {})),
        annotation_static_dir=_resolve(annotation.get("static_dir")),
        annotation_batch_size=int(annotation.get("batch_size", 120)),
        annotators={k: list(v) for k, v in annotation.get("annotators", {}).items()},
        prompt_dir=_resolve(raw.get("prompt_dir")),
        snapshot=raw,
    )
    if config.source_type not in ("mediawiki", "fixtures"):
        raise ConfigInvalid(f"source.type must be mediawiki or fixtures, got {config.source_type!r}")
    if config.source_type == "fixtures" and not config.fixture_dir:
        raise ConfigInvalid("source.type fixtures requires source.fixture_dir")
    return config


@dataclass
class AppContext:
    config: AppConfig
    out_dir: Path
    seed: int
    langs: tuple[str, ...]

    _gateway: LlmGateway | None = None

    def gateway(self) -> LlmGateway:
        if self._gateway is None:
            self._gateway = LlmGateway(self.config.gateway)
        return self._gateway

    def manifest(self) -> Manifest:
        return Manifest(self.out_dir, config_snapshot=self.config.snapshot)

    def languages(self) -> tuple[str, ...]:
        if not self.langs:
            raise ConfigInvalid("at least one --lang is required for this stage")
        unknown = [code for code in self.langs if code not in LANGUAGES]
        if unknown:
            raise ConfigInvalid(f"unknown language codes: {unknown}")
        return self.langs

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def source(self) -> retrieval.PageSource:
        if self.config.source_type == "fixtures":
            return retrieval.FixtureSource(self.config.fixture_dir)
        return retrieval.MediaWikiSource(user_agent=self.config.user_agent)


def _stage(ctx: click.Context, stage_name: str, fn) -> None:
    obj: AppContext = ctx.obj
    started = datetime.now(timezone.utc).isoformat()
    try:
        inputs, outputs, counts = fn(obj)
    except ConfigInvalid as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except MissingInput as exc:
        click.echo(f"missing input: {exc}", err=True)
        sys.exit(EXIT_MISSING_INPUT)
    except Exception as exc:  # stage failure, exit 4 per contract
        logger.exception("stage %s failed", stage_name)
        click.echo(f"stage {stage_name} failed: {exc}", err=True)
        sys.exit(EXIT_STAGE)
    obj.manifest().record_stage(stage_name, inputs, outputs, counts, obj.seed, started)
    summary = ", ".join(f"{k}={v}" for k, v in counts.items())
    click.echo(f"{stage_name}: {summary}")


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None, help="JSON config file.")
@click.option("--out-dir", type=click.Path(), default="runs/default", show_default=True)
@click.option("--mode", type=click.Choice(["live", "record", "replay"]), default=None, help="Gateway mode override.")
@click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True)
@click.option("--lang", "langs", multiple=True, help="Language code; repeatable.")
@click.pass_context
def main(ctx: click.Context, config_path: str | None, out_dir: str, mode: str | None, seed: int, langs: tuple[str, ...]):
    """Benchmark pipeline: taxonomy expansion, RAG synthesis, annotation, judging."""
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(config_path, mode)
    except ConfigInvalid as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    set_default_prompt_dir(config.prompt_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ctx.obj = AppContext(config=config, out_dir=out, seed=seed, langs=tuple(langs))


@main.command()
@click.pass_context
def expand(ctx: click.Context):
    """Expand the universal taxonomy into country-specific tertiary topics."""

    def _run(obj: AppContext):
        taxonomy = load_universal_taxonomy()
        failure_log = obj.path("expansion_failures.jsonl")
        failure_log.unlink(missing_ok=True)
        for code in obj.languages():
            expand_all(
                taxonomy,
                code,
                obj.gateway(),
                obj.config.generator_model,
                concurrency=obj.config.expansion_concurrency,
                failure_log=failure_log,
            )
        issues = validate_taxonomy(taxonomy)
        for issue in issues:
            logger.warning("taxonomy issue: %s %s %s", issue.node, issue.rule, issue.detail)
        out_path = obj.path("taxonomy.json")
        taxonomy.save(out_path)
        counts = {
            "tertiary_topics": sum(taxonomy.count_tertiaries(code) for code in obj.languages()),
            "keywords": sum(
                len(t.keywords) for code in obj.languages() for t in taxonomy.iter_tertiaries(code)
            ),
            "parse_failures": sum(1 for _ in open(failure_log, encoding="utf-8")) if failure_log.exists() else 0,
            "validation_issues": len(issues),
        }
        outputs = {"taxonomy": out_path}
        if failure_log.exists():
            outputs["failures"] = failure_log
        return {}, outputs, counts

    _stage(ctx, "expand", _run)


@main.command()
@click.pass_context
def retrieve(ctx: click.Context):
    """Fetch candidate pages per keyword and apply the two LLM gates."""

    def _run(obj: AppContext):
        taxonomy_path = require_input(obj.path("taxonomy.json"), "expand")
        taxonomy = Taxonomy.load(taxonomy_path)
        source = obj.source()
        records: list[retrieval.PageRecord] = []
        totals: dict[str, int] = {}
        for code in obj.languages():
            lang_records, counts = retrieval.run_retrieval(
                taxonomy,
                code,
                source,
                obj.gateway(),
                obj.config.generator_model,
                pages_per_arm=obj.config.pages_per_arm,
                max_page_chars=obj.config.max_page_chars,
                concurrency=obj.config.retrieval_concurrency,
            )
            records.extend(lang_records)
            for key, value in counts.items():
                totals[key] = totals.get(key, 0) + value
        out_path = obj.path("pages.jsonl")
        retrieval.write_page_records(records, out_path)
        return {"taxonomy": taxonomy_path}, {"pages": out_path}, totals

    _stage(ctx, "retrieve", _run)


@main.command()
@click.pass_context
def extract(ctx: click.Context):
    """Extract up to 3 knowledge points per qualifying page."""

    def _run(obj: AppContext):
        pages_path = require_input(obj.path("pages.jsonl"), "retrieve")
        records = retrieval.read_page_records(pages_path)
        failure_log = obj.path("extraction_failures.jsonl")
        failure_log.unlink(missing_ok=True)
        points, counts = extraction.run_extraction(
            records,
            obj.gateway(),
            obj.config.generator_model,
            concurrency=obj.config.retrieval_concurrency,
            failure_log=failure_log,
        )
        out_path = obj.path("knowledge.jsonl")
        extraction.write_points(points, out_path)
        outputs = {"knowledge": out_path}
        if failure_log.exists():
            outputs["failures"] = failure_log
        return {"pages": pages_path}, outputs, counts

    _stage(ctx, "extract", _run)


@main.command()
@click.pass_context
def synthesize(ctx: click.Context):
    """Generate one question and expert answer per knowledge point, then validate."""

    def _run(obj: AppContext):
        knowledge_path = require_input(obj.path("knowledge.jsonl"), "extract")
        points = extraction.read_points(knowledge_path)
        failure_log = obj.path("synthesis_failures.jsonl")
        failure_log.unlink(missing_ok=True)
        pairs, counts = synthesis.run_synthesis(
            points,
            obj.gateway(),
            obj.config.generator_model,
            concurrency=obj.config.synthesis_concurrency,
            failure_log=failure_log,
        )
        out_path = obj.path("qa_pool.jsonl")
        write_pool(pairs, out_path)
        outputs = {"qa_pool": out_path}
        if failure_log.exists():
            outputs["failures"] = failure_log
        return {"knowledge": knowledge_path}, outputs, counts

    _stage(ctx, "synthesize", _run)


@main.command()
@click.pass_context
def assemble(ctx: click.Context):
    """Split validated pairs into mini/max with disjoint tertiary topics; emit stats."""

    def _run(obj: AppContext):
        pool_path = require_input(obj.path("qa_pool.jsonl"), "synthesize")
        pool = read_pool(pool_path)
        validated = [p for p in pool if p.status == "validated"]
        spec = assembly.SplitSpec(
            topics_per_primary=obj.config.topics_per_primary,
            seed=obj.seed,
            language_scope=tuple(obj.langs),
        )
        mini, maxi = assembly.split_pool(validated, spec)
        if obj.config.cap_per_cell:
            mini = assembly.cap_cells(mini, int(obj.config.cap_per_cell), obj.seed)
        mini_path, max_path = obj.path("mini.jsonl"), obj.path("max.jsonl")
        write_pool(mini, mini_path)
        write_pool(maxi, max_path)
        stats = assembly.compute_stats(validated)
        stats_path = obj.path("stats.csv")
        assembly.write_stats_csv(stats, stats_path)
        dist_path = obj.path("distribution.csv")
        assembly.write_distribution_csv(assembly.topic_distribution(validated), dist_path)
        dist_mini_path = obj.path("distribution_mini.csv")
        assembly.write_distribution_csv(assembly.topic_distribution(mini), dist_mini_path)
        counts = {"pool": len(pool), "validated": len(validated), "mini": len(mini), "max": len(maxi)}
        outputs = {
            "mini": mini_path,
            "max": max_path,
            "stats": stats_path,
            "distribution": dist_path,
            "distribution_mini": dist_mini_path,
        }
        return {"qa_pool": pool_path}, outputs, counts

    _stage(ctx, "assemble", _run)


@main.command("collect-responses")
@click.pass_context
def collect_responses_cmd(ctx: click.Context):
    """Collect baseline and target model responses for every mini question."""

    def _run(obj: AppContext):
        mini_path = require_input(obj.path("mini.jsonl"), "assemble")
        mini = read_pool(mini_path)
        models = [obj.config.baseline_model, *obj.config.target_models]
        responses = evaluation.collect_responses(
            mini, models, obj.gateway(), concurrency=obj.config.judge_concurrency
        )
        out_path = obj.path("responses.jsonl")
        with open(out_path, "w", encoding="utf-8") as fh:
            for (qa_id, model) in sorted(responses):
                fh.write(
                    json.dumps(
                        {"qa_id": qa_id, "model": model, "answer": responses[(qa_id, model)]},
                        ensure_ascii=False,
                        sort_keys=True,
                    )
                    + "\n"
                )
        counts = {"questions": len(mini), "models": len(models), "responses": len(responses)}
        return {"mini": mini_path}, {"responses": out_path}, counts

    _stage(ctx, "collect-responses", _run)


def _read_responses(path: Path) -> dict[tuple[str, str], str]:
    responses: dict[tuple[str, str], str] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                entry = json.loads(line)
                responses[(entry["qa_id"], entry["model"])] = entry["answer"]
    return responses


@main.command()
@click.pass_context
def judge(ctx: click.Context):
    """Run reference-guided pairwise comparisons for every target against the baseline."""

    def _run(obj: AppContext):
        mini_path = require_input(obj.path("mini.jsonl"), "assemble")
        responses_path = require_input(obj.path("responses.jsonl"), "collect-responses")
        mini = read_pool(mini_path)
        responses = _read_responses(responses_path)
        verdicts = evaluation.run_judging(
            mini,
            responses,
            obj.config.target_models,
            obj.config.baseline_model,
            obj.config.judge_models,
            obj.gateway(),
            obj.seed,
            concurrency=obj.config.judge_concurrency,
            dual_pass=obj.config.dual_pass,
        )
        out_path = obj.path("verdicts.jsonl")
        evaluation.write_verdicts(verdicts, out_path)
        counts = {
            "verdicts": len(verdicts),
            "unparseable": sum(1 for v in verdicts if v.score is None),
            "judges": len(obj.config.judge_models),
        }
        return {"mini": mini_path, "responses": responses_path}, {"verdicts": out_path}, counts

    _stage(ctx, "judge", _run)


@main.command()
@click.option(
    "--group-by",
    type=click.Choice(["language", "topic", "language-topic", "all"]),
    default="all",
    show_default=True,
)
@click.pass_context
def report(ctx: click.Context, group_by: str):
    """Emit net-win-rate tables and the cross-judge agreement table."""

    def _run(obj: AppContext):
        verdicts_path = require_input(obj.path("verdicts.jsonl"), "judge")
        verdicts = evaluation.read_verdicts(verdicts_path)
        by_judge: dict[str, list[evaluation.JudgeVerdict]] = {}
        for verdict in verdicts:
            by_judge.setdefault(verdict.judge_model, []).append(verdict)
        primary_judge = obj.config.judge_models[0]
        primary = by_judge.get(primary_judge) or verdicts
        outputs: dict[str, Path] = {}
        if group_by in ("language", "all"):
            path = obj.path("report_language.csv")
            evaluation.write_language_report(primary, path)
            outputs["report_language"] = path
        if group_by in ("topic", "all"):
            path = obj.path("report_topic.csv")
            evaluation.write_topic_report(primary, path)
            outputs["report_topic"] = path
        if group_by in ("language-topic", "all"):
            path = obj.path("report_language_topic.csv")
            evaluation.write_language_topic_report(primary, path)
            outputs["report_language_topic"] = path
        summary_path = obj.path("summary.json")
        evaluation.write_summary_json(primary, summary_path)
        outputs["summary"] = summary_path
        counts = {"verdicts": len(verdicts), "judges": len(by_judge)}
        if len(by_judge) >= 2:
            agreement_path = obj.path("agreement.csv")
            evaluation.write_agreement_report(by_judge, agreement_path)
            outputs["agreement"] = agreement_path
        return {"verdicts": verdicts_path}, outputs, counts

    _stage(ctx, "report", _run)


@main.command("annotate-batch")
@click.option("--size", type=int, default=None, help="Batch size; defaults to the config value.")
@click.option("--annotators", default=None, help="Two comma-separated annotator ids.")
@click.pass_context
def annotate_batch(ctx: click.Context, size: int | None, annotators: str | None):
    """Sample an annotation batch per language from the mini pool."""

    def _run(obj: AppContext):
        mini_path = require_input(obj.path("mini.jsonl"), "assemble")
        mini = read_pool(mini_path)
        store = AnnotationStore(obj.path(obj.config.annotation_log))
        created = 0
        for code in obj.languages():
            pair_ids = annotators.split(",") if annotators else obj.config.annotators.get(code)
            if not pair_ids or len(pair_ids) != 2:
                raise ConfigInvalid(f"exactly 2 annotators required for {code} (flag --annotators or config)")
            batch = sample_batch(
                mini,
                code,
                size=size or obj.config.annotation_batch_size,
                seed=obj.seed,
                annotators=pair_ids,
            )
            store.add_batch(batch)
            created += 1
        counts = {"batches": created}
        return {"mini": mini_path}, {"annotation_log": obj.path(obj.config.annotation_log)}, counts

    _stage(ctx, "annotate-batch", _run)


def build_annotation_app(obj: AppContext):
    """Assembles the FastAPI app from the run directory artifacts."""
    mini_path = require_input(obj.path("mini.jsonl"), "assemble")
    mini = read_pool(mini_path)
    pool = {pair.id: pair for pair in mini}
    excerpts: dict[str, str] = {}
    knowledge_path = obj.path("knowledge.jsonl")
    if knowledge_path.exists():
        by_ref = {
            (kp.page_title, kp.page_url, kp.index): kp.knowledge_text()
            for kp in extraction.read_points(knowledge_path)
        }
        for pair in mini:
            excerpt = by_ref.get(pair.provenance)
            if excerpt:
                excerpts[pair.id] = excerpt
    store = AnnotationStore(obj.path(obj.config.annotation_log))
    static_dir = obj.config.annotation_static_dir
    return create_app(store, pool, excerpts=excerpts, tokens=obj.config.annotation_tokens, static_dir=static_dir)


@main.command("annotate-serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8321, show_default=True)
@click.pass_context
def annotate_serve(ctx: click.Context, host: str, port: int):
    """Serve annotation tasks and the browser client."""
    obj: AppContext = ctx.obj
    try:
        app = build_annotation_app(obj)
    except MissingInput as exc:
        click.echo(f"missing input: {exc}", err=True)
        sys.exit(EXIT_MISSING_INPUT)
    import uvicorn

    uvicorn.run(app, host=host, port=port)


@main.command()
@click.pass_context
def check(ctx: click.Context):
    """Verify the manifest chain: every recorded artifact still matches its digest."""
    obj: AppContext = ctx.obj
    issues = obj.manifest().check()
    for issue in issues:
        click.echo(issue, err=True)
    if issues:
        sys.exit(EXIT_STAGE)
    click.echo("manifest chain clean")


if __name__ == "__main__":
    main()
