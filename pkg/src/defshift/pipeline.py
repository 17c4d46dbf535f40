"""End-to-end run orchestration: corpus to scores, evaluation, and reports.

A run is described by a TOML config (flag overrides welcome) and executes:
sample usages, obtain definitions (service or file), build and merge sense
distributions, score change (distribution and/or embedding route, plus the
dictionary-sense baseline), evaluate against gold if provided, and write
human-readable reports with figures.

Every stage writes its artifact before the next stage starts, so a failed
run keeps everything produced so far; the failure names the stage. A rerun
with identical config and seed produces byte-identical score files. The
manifest records the config hash, seed, package version, and per-stage
counts.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import corpus, defgen, distrib, embed, evaluate, explain, lesk, merge, sensebank
from .errors import ConfigError, StageError

__all__ = [
    "RunConfig",
    "Manifest",
    "load_config",
    "config_from_dict",
    "config_hash",
    "run_pipeline",
    "load_manifest",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    # corpus
    targets: str | None = None
    corpus1: str | None = None
    corpus2: str | None = None
    language: str = "en"
    max_usages: int = 1000
    max_tokens: int = 350
    # definitions
    endpoint: str | None = None
    definitions_file: str | None = None
    strategy: str = "greedy"
    num_beams: int = 5
    diversity_penalty: float = 0.0
    repetition_penalty: float = 1.0
    cache_file: str | None = None
    # merging
    merge_strategy: str = "minimalist"
    threshold: int = 10
    min_hub_words: int = 4
    # scoring
    metrics: tuple[str, ...] = ("jsd",)
    embedding_endpoint: str | None = None
    embeddings_file: str | None = None
    max_pairs: int | None = None
    # dictionary-sense baseline
    inventory_file: str | None = None
    use_pos: bool = False
    # evaluation
    gold_change: str | None = None
    gold_similarity: str | None = None
    # reporting
    top_k: int = 3
    min_share: float = 0.01
    figures: bool = True
    explain_words: tuple[str, ...] = ()
    # run
    seed: int = 0
    jobs: int = 4
    output_dir: str = "out"

    @property
    def distribution_metrics(self) -> tuple[str, ...]:
        return tuple(m for m in self.metrics if m in distrib.DISTRIBUTION_METRICS)

    @property
    def embedding_metrics(self) -> tuple[str, ...]:
        return tuple(m for m in self.metrics if m in distrib.EMBEDDING_METRICS)

    @property
    def has_corpus(self) -> bool:
        return self.targets is not None

    @property
    def wants_definitions(self) -> bool:
        return self.endpoint is not None or self.definitions_file is not None


# (section, key) -> (field name, kind). kind drives type checking/coercion.
_SCHEMA: dict[tuple[str, str], tuple[str, str]] = {
    ("corpus", "targets"): ("targets", "str"),
    ("corpus", "period1"): ("corpus1", "str"),
    ("corpus", "period2"): ("corpus2", "str"),
    ("corpus", "language"): ("language", "str"),
    ("corpus", "max_usages"): ("max_usages", "int"),
    ("corpus", "max_tokens"): ("max_tokens", "int"),
    ("generation", "endpoint"): ("endpoint", "str"),
    ("generation", "definitions"): ("definitions_file", "str"),
    ("generation", "strategy"): ("strategy", "str"),
    ("generation", "num_beams"): ("num_beams", "int"),
    ("generation", "diversity_penalty"): ("diversity_penalty", "float"),
    ("generation", "repetition_penalty"): ("repetition_penalty", "float"),
    ("generation", "cache"): ("cache_file", "str"),
    ("merge", "strategy"): ("merge_strategy", "str"),
    ("merge", "threshold"): ("threshold", "int"),
    ("merge", "min_hub_words"): ("min_hub_words", "int"),
    ("scoring", "metrics"): ("metrics", "strlist"),
    ("scoring", "embedding_endpoint"): ("embedding_endpoint", "str"),
    ("scoring", "embeddings"): ("embeddings_file", "str"),
    ("scoring", "max_pairs"): ("max_pairs", "int"),
    ("lesk", "inventory"): ("inventory_file", "str"),
    ("lesk", "use_pos"): ("use_pos", "bool"),
    ("eval", "gold_change"): ("gold_change", "str"),
    ("eval", "gold_similarity"): ("gold_similarity", "str"),
    ("report", "top_k"): ("top_k", "int"),
    ("report", "min_share"): ("min_share", "float"),
    ("report", "figures"): ("figures", "bool"),
    ("report", "words"): ("explain_words", "strlist"),
    ("run", "seed"): ("seed", "int"),
    ("run", "jobs"): ("jobs", "int"),
    ("run", "output_dir"): ("output_dir", "str"),
}

_PATH_FIELDS = (
    "targets",
    "corpus1",
    "corpus2",
    "definitions_file",
    "cache_file",
    "embeddings_file",
    "inventory_file",
    "gold_change",
    "gold_similarity",
    "output_dir",
)


def _coerce(kind: str, value: Any, where: str) -> Any:
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected a boolean, got {value!r}")
        return value
    if kind == "strlist":
        if not isinstance(value, (list, tuple)) or not all(isinstance(x, str) for x in value):
            raise ConfigError(f"{where}: expected a list of strings, got {value!r}")
        return tuple(value)
    raise AssertionError(kind)


def config_from_dict(data: Mapping[str, Any]) -> RunConfig:
    """Build and validate a RunConfig from nested section dicts."""
    fields: dict[str, Any] = {}
    for section, content in data.items():
        if not isinstance(content, Mapping):
            raise ConfigError(f"[{section}] must be a table")
        for key, value in content.items():
            try:
                name, kind = _SCHEMA[(section, key)]
            except KeyError:
                raise ConfigError(f"unknown config key {section}.{key}") from None
            fields[name] = _coerce(kind, value, f"{section}.{key}")
    config = RunConfig(**fields)
    _validate(config)
    return config


def _validate(config: RunConfig) -> None:
    if config.gold_change and config.gold_similarity:
        raise ConfigError("eval.gold_change and eval.gold_similarity are mutually exclusive")
    if config.endpoint and config.definitions_file:
        raise ConfigError("generation.endpoint and generation.definitions are mutually exclusive")
    if config.embedding_endpoint and config.embeddings_file:
        raise ConfigError("scoring.embedding_endpoint and scoring.embeddings are mutually exclusive")
    for metric in config.metrics:
        if metric not in distrib.CHANGE_METRICS:
            raise ConfigError(f"unknown metric {metric!r} (choose from {distrib.CHANGE_METRICS})")
    if not config.metrics:
        raise ConfigError("scoring.metrics must name at least one metric")
    if not config.wants_definitions and not config.inventory_file:
        raise ConfigError("no route configured: set generation.endpoint, generation.definitions, or lesk.inventory")
    if config.endpoint and not config.has_corpus:
        raise ConfigError("generation.endpoint requires a [corpus] section")
    if config.inventory_file and not config.has_corpus:
        raise ConfigError("lesk.inventory requires a [corpus] section")
    if config.has_corpus and (config.corpus1 is None or config.corpus2 is None):
        raise ConfigError("corpus.period1 and corpus.period2 are both required with corpus.targets")
    if config.embedding_metrics:
        if not (config.embedding_endpoint or config.embeddings_file):
            raise ConfigError(f"metrics {config.embedding_metrics} need scoring.embedding_endpoint or scoring.embeddings")
        if not config.wants_definitions:
            raise ConfigError("embedding metrics need definitions (generation.endpoint or generation.definitions)")
    if config.max_pairs is not None and config.max_pairs < 1:
        raise ConfigError("scoring.max_pairs must be >= 1")
    if config.jobs < 1:
        raise ConfigError("run.jobs must be >= 1")
    if config.top_k < 1:
        raise ConfigError("report.top_k must be >= 1")
    if not (0.0 <= config.min_share <= 1.0):
        raise ConfigError("report.min_share must be in [0, 1]")
    # Fail on bad strategy/decoding values before any stage runs.
    try:
        merge.MergeConfig(strategy=config.merge_strategy, threshold=config.threshold,
                          min_hub_words=config.min_hub_words)
        defgen.DecodingParams(strategy=config.strategy, num_beams=config.num_beams,
                              diversity_penalty=config.diversity_penalty,
                              repetition_penalty=config.repetition_penalty)
        if config.has_corpus:
            corpus.SamplingConfig(max_per_word_per_period=config.max_usages,
                                  max_tokens=config.max_tokens, seed=config.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """Parse a TOML run config; relative paths resolve against the file's directory.

    ``overrides`` maps dotted keys ("merge.threshold") to already-typed values
    and wins over the file.
    """
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data: dict[str, Any] = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    for dotted, value in (overrides or {}).items():
        section, sep, key = dotted.partition(".")
        if not sep:
            raise ConfigError(f"override {dotted!r} must look like section.key")
        data.setdefault(section, {})
        if not isinstance(data[section], dict):
            raise ConfigError(f"[{section}] must be a table")
        data[section][key] = value

    base = path.parent
    for section, content in data.items():
        if not isinstance(content, Mapping):
            continue
        for key, value in list(content.items()):
            name_kind = _SCHEMA.get((section, key))
            if name_kind and name_kind[0] in _PATH_FIELDS and isinstance(value, str) and value:
                content[key] = str((base / value).expanduser()) if not Path(value).is_absolute() else value
    return config_from_dict(data)


def config_hash(config: RunConfig) -> str:
    payload = json.dumps(asdict(config), sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass
class Manifest:
    version: str
    config_hash: str
    seed: int
    stages: dict[str, dict[str, int]] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    diagnostics: dict[str, list[str]] = field(default_factory=dict)

    def write(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True, ensure_ascii=False)
            fh.write("\n")


def load_manifest(path: str | Path) -> Manifest:
    with Path(path).open("r", encoding="utf-8") as fh:
        data = json.load(fh)
    return Manifest(
        version=data["version"],
        config_hash=data["config_hash"],
        seed=data["seed"],
        stages=data.get("stages", {}),
        outputs=data.get("outputs", {}),
        diagnostics=data.get("diagnostics", {}),
    )


def _stage(name: str, func: Callable[[], Any]) -> Any:
    log.info("stage %s", name)
    try:
        return func()
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, str(exc)) from exc


def _safe_name(word: str) -> str:
    return re.sub(r"[^0-9A-Za-z_-]+", "_", word) or "word"


def _group_definitions(batch: defgen.DefinitionBatch) -> dict[tuple[str, int], list[defgen.Definition]]:
    groups: dict[tuple[str, int], list[defgen.Definition]] = {}
    for d in batch.definitions:
        groups.setdefault((d.word, d.period), []).append(d)
    return groups


def run_pipeline(config: RunConfig) -> Manifest:
    """Execute all configured stages; returns the manifest written at the end."""
    _validate(config)
    from . import __version__

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(version=__version__, config_hash=config_hash(config), seed=config.seed)

    def artifact(name: str, filename: str) -> Path:
        manifest.outputs[name] = filename
        return out / filename

    # --- sample ---------------------------------------------------------
    usages: list[corpus.UsageExample] = []
    targets: list[corpus.TargetWord] = []
    if config.has_corpus:
        def do_sample():
            nonlocal usages, targets
            targets = corpus.load_targets(config.targets, config.language)
            sampling = corpus.SamplingConfig(
                max_per_word_per_period=config.max_usages,
                max_tokens=config.max_tokens,
                seed=config.seed,
            )
            found: dict[tuple[str, int], list[corpus.UsageExample]] = {}
            for period, corpus_path in ((1, config.corpus1), (2, config.corpus2)):
                for u in corpus.find_usages(corpus_path, targets, period):
                    found.setdefault((u.word, u.period), []).append(u)
            for key in sorted(found):
                usages.extend(corpus.sample_usages(found[key], sampling))
            corpus.write_usages(usages, artifact("usages", "usages.jsonl"))
            manifest.stages["sample"] = {"targets": len(targets), "usages": len(usages)}

        _stage("sample", do_sample)

    # --- define ----------------------------------------------------------
    batch: defgen.DefinitionBatch | None = None
    if config.wants_definitions:
        def do_define():
            nonlocal batch
            if config.definitions_file:
                batch = defgen.load_definitions(config.definitions_file)
            else:
                params = defgen.DecodingParams(
                    strategy=config.strategy,
                    num_beams=config.num_beams,
                    diversity_penalty=config.diversity_penalty,
                    repetition_penalty=config.repetition_penalty,
                )
                batch = defgen.generate(
                    usages,
                    config.endpoint,
                    params,
                    concurrency_limit=config.jobs,
                    language=config.language,
                    cache_path=config.cache_file,
                )
            defgen.write_definitions(batch.definitions, artifact("definitions", "definitions.jsonl"))
            manifest.stages["define"] = {
                "definitions": len(batch.definitions),
                "dropped_empty": batch.dropped_empty,
                "failed": len(batch.failed),
            }
            if batch.failed:
                manifest.diagnostics["define"] = [f"{uid}: {reason}" for uid, reason in batch.failed]

        _stage("define", do_define)

    # --- senses + merge --------------------------------------------------
    raw_dists: list[sensebank.SenseDistribution] = []
    merged_dists: list[sensebank.SenseDistribution] = []
    if batch is not None:
        def do_senses():
            groups = _group_definitions(batch)
            for (word, period) in sorted(groups):
                raw_dists.append(sensebank.build_distribution(groups[(word, period)], word, period))
            sensebank.write_distributions(raw_dists, artifact("distributions", "distributions.jsonl"))
            manifest.stages["senses"] = {
                "distributions": len(raw_dists),
                "senses": sum(d.sense_count() for d in raw_dists),
            }

        _stage("senses", do_senses)

        def do_merge():
            mcfg = merge.MergeConfig(
                strategy=config.merge_strategy,
                threshold=config.threshold,
                min_hub_words=config.min_hub_words,
            )
            results: dict[tuple[str, int], merge.MergeResult] = {}
            for dist in raw_dists:
                res = merge.merge_distribution(dist, mcfg)
                results[(dist.word, dist.period)] = res
                merged_dists.append(res.merged)
            sensebank.write_distributions(merged_dists, artifact("merged", "merged.jsonl"))
            merge.write_merge_report(results, artifact("merge_report", "merge_report.jsonl"))
            manifest.stages["merge"] = {
                "senses_before": sum(d.sense_count() for d in raw_dists),
                "senses_after": sum(d.sense_count() for d in merged_dists),
            }

        _stage("merge", do_merge)

    # --- score -----------------------------------------------------------
    records: list[distrib.ChangeScoreRecord] = []
    diagnostics: list[str] = []
    provenance = distrib.Provenance(
        generation=config.strategy,
        merge=config.merge_strategy,
        threshold=config.threshold,
    )
    if merged_dists and config.distribution_metrics:
        def do_score_dist():
            recs, skipped = distrib.score_distribution_pairs(
                merged_dists, config.distribution_metrics, provenance
            )
            records.extend(recs)
            diagnostics.extend(skipped)
            manifest.stages["score_distributions"] = {"scores": len(recs), "skipped": len(skipped)}

        _stage("score_distributions", do_score_dist)

    if batch is not None and config.embedding_metrics:
        def do_score_embed():
            groups = _group_definitions(batch)
            sets: list[embed.EmbeddingSet] = []
            zero_notes: list[str] = []
            all_vectors: dict[str, list[float]] = {}
            file_vectors = (
                embed.load_embeddings(config.embeddings_file) if config.embeddings_file else None
            )
            for key in sorted(groups):
                defs = groups[key]
                if file_vectors is not None:
                    res = embed.vectors_from_file(defs, file_vectors)
                else:
                    res = embed.embed_definitions(
                        defs,
                        config.embedding_endpoint,
                        concurrency_limit=config.jobs,
                    )
                for uid, row in zip(res.usage_ids, res.embeddings.vectors):
                    all_vectors[uid] = [float(x) for x in row]
                zeros = res.embeddings.zero_vector_count()
                if zeros:
                    zero_notes.append(f"{key[0]} period {key[1]}: {zeros} zero vectors")
                for uid, reason in res.failed:
                    diagnostics.append(f"embedding dropped {uid}: {reason}")
                sets.append(res.embeddings)
            embed.write_embeddings(all_vectors, artifact("embeddings", "embeddings.jsonl"))
            recs, skipped = embed.score_embedding_pairs(
                sets,
                config.embedding_metrics,
                provenance,
                max_pairs=config.max_pairs,
                seed=config.seed,
            )
            records.extend(recs)
            diagnostics.extend(skipped)
            diagnostics.extend(zero_notes)
            manifest.stages["score_embeddings"] = {
                "scores": len(recs),
                "skipped": len(skipped),
                "vectors": len(all_vectors),
            }

        _stage("score_embeddings", do_score_embed)

    lesk_dists: list[sensebank.SenseDistribution] = []
    if config.inventory_file:
        def do_lesk():
            inventory = lesk.load_inventory(config.inventory_file)
            pos_by_word = {t.lemma: t.pos for t in targets if t.pos}
            result = lesk.lesk_pipeline(usages, inventory, use_pos=config.use_pos, pos_by_word=pos_by_word)
            lesk_dists.extend(result.distributions)
            sensebank.write_distributions(lesk_dists, artifact("lesk_distributions", "lesk_distributions.jsonl"))
            metrics = config.distribution_metrics or ("jsd",)
            recs, skipped = distrib.score_distribution_pairs(
                lesk_dists, metrics, distrib.Provenance(generation="lesk", merge="none", threshold=0)
            )
            records.extend(recs)
            diagnostics.extend(skipped)
            diagnostics.extend(result.diagnostics)
            manifest.stages["lesk"] = {
                "distributions": len(result.distributions),
                "scores": len(recs),
                "unassigned": sum(result.unassigned.values()),
            }

        _stage("lesk", do_lesk)

    def do_write_scores():
        distrib.write_scores(records, artifact("scores", "scores.tsv"))
        if diagnostics:
            manifest.diagnostics["score"] = sorted(diagnostics)
        manifest.stages["scores"] = {"records": len(records)}

    _stage("write_scores", do_write_scores)

    # --- evaluate ----------------------------------------------------------
    gold: evaluate.GoldScores | None = None
    eval_rows: list[evaluate.EvaluationRow] = []
    if config.gold_change or config.gold_similarity:
        def do_eval():
            nonlocal gold
            gold_path = config.gold_change or config.gold_similarity
            gold = evaluate.load_gold(gold_path, is_similarity=bool(config.gold_similarity))
            eval_rows.extend(evaluate.evaluate_records(records, gold))
            evaluate.write_evaluation(eval_rows, artifact("evaluation", "evaluation.tsv"))
            details = [
                {
                    "metric": row.metric,
                    "strategy": row.strategy,
                    "missing_pred": list(row.missing_pred),
                    "missing_gold": list(row.missing_gold),
                }
                for row in eval_rows
            ]
            with artifact("evaluation_details", "evaluation_details.json").open("w", encoding="utf-8") as fh:
                json.dump(details, fh, indent=2, sort_keys=True, ensure_ascii=False)
                fh.write("\n")
            manifest.stages["evaluate"] = {"rows": len(eval_rows), "gold_words": len(gold)}

        _stage("evaluate", do_eval)

    # --- explain -----------------------------------------------------------
    def do_explain():
        source = merged_dists if merged_dists else lesk_dists
        by_word: dict[str, dict[int, sensebank.SenseDistribution]] = {}
        for dist in source:
            by_word.setdefault(dist.word, {})[dist.period] = dist
        wanted = set(config.explain_words) if config.explain_words else set(by_word)
        scores_by_word: dict[str, dict[str, float]] = {}
        for rec in records:
            scores_by_word.setdefault(rec.word, {})[rec.metric] = rec.score

        figures_dir = out / "figures"
        figure_count = 0
        text_path = artifact("explain_text", "explain.txt")
        json_path = artifact("explain_json", "explain.jsonl")
        if config.figures:
            figures_dir.mkdir(exist_ok=True)
        with text_path.open("w", encoding="utf-8") as text_fh, \
                json_path.open("w", encoding="utf-8") as json_fh:
            for word in sorted(by_word):
                if word not in wanted:
                    continue
                d1 = by_word[word].get(1)
                d2 = by_word[word].get(2)
                report = explain.top_senses_report(
                    word, d1, d2, k=config.top_k, scores=scores_by_word.get(word, {})
                )
                summary = explain.shift_summary(word, d1, d2, min_share=config.min_share)
                text_fh.write(explain.format_report(report, summary))
                text_fh.write("\n")
                json_fh.write(
                    json.dumps(explain.report_to_json(report, summary), ensure_ascii=False, sort_keys=True)
                    + "\n"
                )
                if config.figures:
                    from . import figures

                    figures.sense_comparison_figure(
                        report, figures_dir / f"senses_{_safe_name(word)}.png"
                    )
                    figure_count += 1
        if config.figures:
            from . import figures

            if raw_dists and merged_dists:
                label = f"{config.merge_strategy} t={config.threshold}"
                figures.merge_reduction_figure(
                    {"unmerged": raw_dists, label: merged_dists},
                    figures_dir / "merge_reduction.png",
                )
                figure_count += 1
            if gold is not None and eval_rows:
                preds_by_metric: dict[str, dict[str, float]] = {}
                for rec in records:
                    preds_by_metric.setdefault(rec.metric, {})[rec.word] = rec.score
                for row in eval_rows:
                    preds = preds_by_metric.get(row.metric)
                    if preds:
                        figures.rank_agreement_figure(
                            preds,
                            gold,
                            row.rho,
                            figures_dir / f"rank_agreement_{row.metric}.png",
                            label=row.metric,
                        )
                        figure_count += 1
                        break  # one agreement figure is enough for the report
            manifest.outputs["figures"] = "figures"
        manifest.stages["explain"] = {"words": len(wanted & set(by_word)), "figures": figure_count}

    _stage("explain", do_explain)

    manifest.outputs["manifest"] = "manifest.json"
    manifest.write(out / "manifest.json")
    return manifest
