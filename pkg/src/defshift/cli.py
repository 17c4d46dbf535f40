"""Command-line interface.

One subcommand per pipeline stage plus ``run`` for the whole flow from a
TOML config. Stage commands read and write the documented file formats, so
any stage can be replayed or swapped out without rerunning the others.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, corpus, defgen, distrib, embed, evaluate, explain, lesk, merge, pipeline, sensebank
from .errors import ConfigError, DefShiftError

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib


def _metrics_arg(text: str) -> tuple[str, ...]:
    metrics = tuple(m.strip() for m in text.split(",") if m.strip())
    if not metrics:
        raise argparse.ArgumentTypeError("at least one metric required")
    for m in metrics:
        if m not in distrib.CHANGE_METRICS:
            raise argparse.ArgumentTypeError(f"unknown metric {m!r} (choose from {', '.join(distrib.CHANGE_METRICS)})")
    return metrics


def _provenance_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--generation", default="greedy", help="generation strategy label for provenance")
    parser.add_argument("--merge-strategy", default="none", help="merge strategy label for provenance")
    parser.add_argument("--threshold", type=int, default=0, help="merge threshold label for provenance")


def _cmd_sample(args: argparse.Namespace) -> int:
    targets = corpus.load_targets(args.targets, args.language)
    try:
        sampling = corpus.SamplingConfig(
            max_per_word_per_period=args.max_usages,
            max_tokens=args.max_tokens,
            seed=args.seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    grouped: dict[tuple[str, int], list[corpus.UsageExample]] = {}
    for period, path in ((1, args.corpus1), (2, args.corpus2)):
        for u in corpus.find_usages(path, targets, period):
            grouped.setdefault((u.word, u.period), []).append(u)
    usages: list[corpus.UsageExample] = []
    for key in sorted(grouped):
        usages.extend(corpus.sample_usages(grouped[key], sampling))
    corpus.write_usages(usages, args.out)
    coverage = corpus.coverage_report(targets, usages)
    for lemma in sorted(coverage):
        counts = coverage[lemma]
        print(f"{lemma}\t{counts['period1']}\t{counts['period2']}")
    print(f"wrote {len(usages)} usages to {args.out}", file=sys.stderr)
    return 0


def _cmd_define(args: argparse.Namespace) -> int:
    usages = corpus.load_usages(args.usages)
    try:
        params = defgen.DecodingParams(
            strategy=args.strategy,
            num_beams=args.num_beams,
            diversity_penalty=args.diversity_penalty,
            repetition_penalty=args.repetition_penalty,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    batch = defgen.generate(
        usages,
        args.endpoint,
        params,
        concurrency_limit=args.jobs,
        language=args.language,
        cache_path=args.cache,
    )
    defgen.write_definitions(batch.definitions, args.out)
    print(
        f"wrote {len(batch.definitions)} definitions to {args.out} "
        f"({batch.from_cache} cached, {batch.dropped_empty} empty, {len(batch.failed)} failed)",
        file=sys.stderr,
    )
    return 0


def _cmd_import_definitions(args: argparse.Namespace) -> int:
    batch = defgen.load_definitions(args.input)
    defgen.write_definitions(batch.definitions, args.out)
    print(
        f"imported {len(batch.definitions)} definitions to {args.out} "
        f"({batch.dropped_empty} empty records dropped)",
        file=sys.stderr,
    )
    return 0


def _load_distributions_arg(args: argparse.Namespace) -> list[sensebank.SenseDistribution]:
    if getattr(args, "definitions", None):
        batch = defgen.load_definitions(args.definitions)
        groups: dict[tuple[str, int], list[defgen.Definition]] = {}
        for d in batch.definitions:
            groups.setdefault((d.word, d.period), []).append(d)
        return [sensebank.build_distribution(groups[k], *k) for k in sorted(groups)]
    return sensebank.load_distributions(args.distributions)


def _cmd_merge(args: argparse.Namespace) -> int:
    dists = _load_distributions_arg(args)
    try:
        config = merge.MergeConfig(
            strategy=args.strategy,
            threshold=args.threshold,
            min_hub_words=args.min_hub_words,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    results: dict[tuple[str, int], merge.MergeResult] = {}
    merged: list[sensebank.SenseDistribution] = []
    for dist in dists:
        res = merge.merge_distribution(dist, config)
        results[(dist.word, dist.period)] = res
        merged.append(res.merged)
    sensebank.write_distributions(merged, args.out)
    if args.report:
        merge.write_merge_report(results, args.report)
    before = sum(d.sense_count() for d in dists)
    after = sum(d.sense_count() for d in merged)
    print(f"merged {before} senses into {after} across {len(merged)} distributions", file=sys.stderr)
    return 0


def _cmd_score_distributions(args: argparse.Namespace) -> int:
    dists = sensebank.load_distributions(args.distributions)
    provenance = distrib.Provenance(
        generation=args.generation, merge=args.merge_strategy, threshold=args.threshold
    )
    records, skipped = distrib.score_distribution_pairs(dists, args.metrics, provenance)
    distrib.write_scores(records, args.out)
    for note in skipped:
        print(f"skipped: {note}", file=sys.stderr)
    print(f"wrote {len(records)} scores to {args.out}", file=sys.stderr)
    return 0


def _cmd_embed(args: argparse.Namespace) -> int:
    batch = defgen.load_definitions(args.definitions)
    groups: dict[tuple[str, int], list[defgen.Definition]] = {}
    for d in batch.definitions:
        groups.setdefault((d.word, d.period), []).append(d)
    vectors: dict[str, list[float]] = {}
    failures = 0
    for key in sorted(groups):
        res = embed.embed_definitions(groups[key], args.endpoint, concurrency_limit=args.jobs)
        failures += len(res.failed)
        for uid, row in zip(res.usage_ids, res.embeddings.vectors):
            vectors[uid] = [float(x) for x in row]
    embed.write_embeddings(vectors, args.out)
    print(f"wrote {len(vectors)} vectors to {args.out} ({failures} failed)", file=sys.stderr)
    return 0


def _cmd_score_embeddings(args: argparse.Namespace) -> int:
    batch = defgen.load_definitions(args.definitions)
    vectors = embed.load_embeddings(args.vectors)
    groups: dict[tuple[str, int], list[defgen.Definition]] = {}
    for d in batch.definitions:
        groups.setdefault((d.word, d.period), []).append(d)
    sets = []
    for key in sorted(groups):
        res = embed.vectors_from_file(groups[key], vectors)
        for uid, reason in res.failed:
            print(f"dropped {uid}: {reason}", file=sys.stderr)
        sets.append(res.embeddings)
    provenance = distrib.Provenance(
        generation=args.generation, merge=args.merge_strategy, threshold=args.threshold
    )
    records, skipped = embed.score_embedding_pairs(
        sets, args.metrics, provenance, max_pairs=args.max_pairs, seed=args.seed
    )
    distrib.write_scores(records, args.out)
    for note in skipped:
        print(f"skipped: {note}", file=sys.stderr)
    print(f"wrote {len(records)} scores to {args.out}", file=sys.stderr)
    return 0


def _cmd_lesk(args: argparse.Namespace) -> int:
    usages = corpus.load_usages(args.usages)
    inventory = lesk.load_inventory(args.inventory)
    pos_by_word: dict[str, str] = {}
    if args.targets:
        pos_by_word = {t.lemma: t.pos for t in corpus.load_targets(args.targets) if t.pos}
    result = lesk.lesk_pipeline(usages, inventory, use_pos=args.use_pos, pos_by_word=pos_by_word)
    if args.distributions:
        sensebank.write_distributions(result.distributions, args.distributions)
    provenance = distrib.Provenance(generation="lesk", merge="none", threshold=0)
    records, skipped = distrib.score_distribution_pairs(result.distributions, args.metrics, provenance)
    distrib.write_scores(records, args.out)
    for note in result.diagnostics + skipped:
        print(f"note: {note}", file=sys.stderr)
    print(f"wrote {len(records)} scores to {args.out}", file=sys.stderr)
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    records = distrib.load_scores(args.scores)
    gold = evaluate.load_gold(
        args.gold_change or args.gold_similarity,
        is_similarity=bool(args.gold_similarity),
    )
    rows = evaluate.evaluate_records(records, gold)
    evaluate.write_evaluation(rows, args.out)
    for row in rows:
        print(f"{row.metric}\t{row.strategy}\trho={row.rho:.4f}\tp={row.p_value:.4g}\tn={row.n}")
        if row.missing_pred:
            print(f"  gold words without predictions: {', '.join(row.missing_pred)}", file=sys.stderr)
        if row.missing_gold:
            print(f"  predictions without gold: {', '.join(row.missing_gold)}", file=sys.stderr)
    if args.figure and rows:
        from . import figures

        row = rows[0]
        preds = {r.word: r.score for r in records
                 if r.metric == row.metric and r.provenance.to_string() == row.strategy}
        figures.rank_agreement_figure(preds, gold, row.rho, args.figure, label=row.metric)
        print(f"wrote figure {args.figure}", file=sys.stderr)
    return 0


def _cmd_explain(args: argparse.Namespace) -> int:
    dists = sensebank.load_distributions(args.distributions)
    by_word: dict[str, dict[int, sensebank.SenseDistribution]] = {}
    for dist in dists:
        by_word.setdefault(dist.word, {})[dist.period] = dist
    scores_by_word: dict[str, dict[str, float]] = {}
    if args.scores:
        for rec in distrib.load_scores(args.scores):
            scores_by_word.setdefault(rec.word, {})[rec.metric] = rec.score
    words = args.word or sorted(by_word)
    json_fh = Path(args.json).open("w", encoding="utf-8") if args.json else None
    if args.figures:
        Path(args.figures).mkdir(parents=True, exist_ok=True)
    try:
        for word in words:
            if word not in by_word:
                print(f"note: no distributions for {word!r}", file=sys.stderr)
                continue
            d1 = by_word[word].get(1)
            d2 = by_word[word].get(2)
            report = explain.top_senses_report(
                word, d1, d2, k=args.top_k, scores=scores_by_word.get(word, {})
            )
            summary = explain.shift_summary(word, d1, d2, min_share=args.min_share)
            sys.stdout.write(explain.format_report(report, summary))
            sys.stdout.write("\n")
            if json_fh:
                json_fh.write(
                    json.dumps(explain.report_to_json(report, summary), ensure_ascii=False, sort_keys=True)
                    + "\n"
                )
            if args.figures:
                from . import figures

                figures.sense_comparison_figure(
                    report, Path(args.figures) / f"senses_{pipeline._safe_name(word)}.png"
                )
    finally:
        if json_fh:
            json_fh.close()
    return 0


def _parse_override(text: str):
    key, sep, value = text.partition("=")
    if not sep or "." not in key:
        raise argparse.ArgumentTypeError(f"override must look like section.key=value, got {text!r}")
    try:
        parsed = tomllib.loads(f"v = {value}")["v"]
    except tomllib.TOMLDecodeError:
        parsed = value  # bare strings may come unquoted
    return key, parsed


def _cmd_run(args: argparse.Namespace) -> int:
    overrides = dict(args.set or [])
    if args.seed is not None:
        overrides["run.seed"] = args.seed
    if args.jobs is not None:
        overrides["run.jobs"] = args.jobs
    if args.output_dir is not None:
        overrides["run.output_dir"] = args.output_dir
    config = pipeline.load_config(args.config, overrides)
    manifest = pipeline.run_pipeline(config)
    for stage in manifest.stages:
        counts = ", ".join(f"{k}={v}" for k, v in manifest.stages[stage].items())
        print(f"{stage}: {counts}")
    out = Path(config.output_dir)
    if "evaluation" in manifest.outputs:
        for row in evaluate.load_evaluation(out / manifest.outputs["evaluation"]):
            print(f"{row.metric}\t{row.strategy}\trho={row.rho:.4f}\tp={row.p_value:.4g}\tn={row.n}")
    print(f"artifacts in {out}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="defshift",
        description="Detect lexical semantic change from generated definitions.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="find and sample target usages from two corpora")
    p.add_argument("--targets", required=True)
    p.add_argument("--corpus1", required=True, help="period-1 corpus (txt or tsv)")
    p.add_argument("--corpus2", required=True, help="period-2 corpus (txt or tsv)")
    p.add_argument("--language", default="en")
    p.add_argument("--max-usages", type=int, default=1000)
    p.add_argument("--max-tokens", type=int, default=350)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("define", help="generate definitions for sampled usages")
    p.add_argument("--usages", required=True)
    p.add_argument("--endpoint", required=True)
    p.add_argument("--strategy", default="greedy", choices=defgen.DECODING_STRATEGIES)
    p.add_argument("--num-beams", type=int, default=5)
    p.add_argument("--diversity-penalty", type=float, default=0.0,
                   help="only meaningful with --strategy diverse_beam")
    p.add_argument("--repetition-penalty", type=float, default=1.0)
    p.add_argument("--language", default="en")
    p.add_argument("--cache")
    p.add_argument("--jobs", type=int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_define)

    p = sub.add_parser("import-definitions", help="validate and normalize pre-generated definitions")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_import_definitions)

    p = sub.add_parser("merge", help="merge near-duplicate senses onto hub definitions")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--definitions", help="definitions file; distributions are built first")
    src.add_argument("--distributions", help="pre-built distributions file")
    p.add_argument("--strategy", default="minimalist", choices=merge.MERGE_STRATEGIES)
    p.add_argument("--threshold", type=int, default=10)
    p.add_argument("--min-hub-words", type=int, default=4)
    p.add_argument("--report", help="write the key-to-hub mapping here")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_merge)

    p = sub.add_parser("score-distributions", help="jsd/cosine change scores from distributions")
    p.add_argument("--distributions", required=True)
    p.add_argument("--metrics", type=_metrics_arg, default=("jsd",))
    _provenance_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_score_distributions)

    p = sub.add_parser("embed", help="fetch definition embeddings from a service")
    p.add_argument("--definitions", required=True)
    p.add_argument("--endpoint", required=True)
    p.add_argument("--jobs", type=int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("score-embeddings", help="apd/prt/am change scores from embeddings")
    p.add_argument("--definitions", required=True)
    p.add_argument("--vectors", required=True)
    p.add_argument("--metrics", type=_metrics_arg, default=("apd", "prt", "am"))
    p.add_argument("--max-pairs", type=int)
    p.add_argument("--seed", type=int, default=0)
    _provenance_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_score_embeddings)

    p = sub.add_parser("lesk", help="dictionary-sense baseline scores")
    p.add_argument("--usages", required=True)
    p.add_argument("--inventory", required=True)
    p.add_argument("--targets", help="targets file supplying parts of speech")
    p.add_argument("--use-pos", action="store_true")
    p.add_argument("--metrics", type=_metrics_arg, default=("jsd",))
    p.add_argument("--distributions", help="also write the assigned distributions here")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_lesk)

    p = sub.add_parser("evaluate", help="rank correlation of scores against gold")
    p.add_argument("--scores", required=True)
    gold = p.add_mutually_exclusive_group(required=True)
    gold.add_argument("--gold-change", help="gold TSV where higher means more change")
    gold.add_argument("--gold-similarity", help="gold TSV where higher means more similar")
    p.add_argument("--figure", help="write a rank-agreement figure here")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("explain", help="per-word sense reports and shift summaries")
    p.add_argument("--distributions", required=True)
    p.add_argument("--scores")
    p.add_argument("--word", action="append", help="restrict to this word (repeatable)")
    p.add_argument("--top-k", type=int, default=3)
    p.add_argument("--min-share", type=float, default=0.01)
    p.add_argument("--json", help="also write JSON records here")
    p.add_argument("--figures", help="write per-word figures into this directory")
    p.set_defaults(func=_cmd_explain)

    p = sub.add_parser("run", help="run the configured pipeline end to end")
    p.add_argument("--config", required=True)
    p.add_argument("--set", action="append", type=_parse_override, metavar="SECTION.KEY=VALUE")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--output-dir")
    p.set_defaults(func=_cmd_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DefShiftError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
