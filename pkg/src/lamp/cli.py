"""Command-line entry point: every analytic and pipeline stage as a
subcommand writing delimited reports and figures under --out.

Exit codes: 0 success, 1 runtime failure (message on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import annotsvc, editops, evalstats, idiom, llmclient, pipeline, reporting, spanmetrics
from .corpus import AnnotatedParagraph, EditCategory, ParagraphRecord, Split, load_corpus, save_corpus


class CliError(RuntimeError):
    pass


def fmt2(value: float) -> str:
    """Two-decimal display that collapses a trailing zero (1.00 -> 1.0)."""
    s = f"{value:.2f}"
    return s[:-1] if s.endswith("0") else s


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _provider(args) -> llmclient.Provider:
    return llmclient.provider_from_env(mode=args.provider, fixture_path=args.fixture)


def _config(args) -> pipeline.PipelineConfig:
    return pipeline.PipelineConfig(
        model=args.model or llmclient.default_model(),
        seed=args.seed,
        max_tokens=args.max_tokens,
        jobs=args.jobs,
    )


def _add_provider_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--provider", choices=["live", "record", "replay"], default=None,
                        help="completion provider mode (default: LAMP_PROVIDER_MODE)")
    parser.add_argument("--fixture", default=None, help="record/replay fixture path")
    parser.add_argument("--model", default=None, help="model identifier (default: LAMP_MODEL)")
    parser.add_argument("--seed", type=int, default=0, help="seed for exemplar sampling")
    parser.add_argument("--jobs", type=int, default=1, help="concurrent rewrite workers")
    parser.add_argument("--max-tokens", type=int, default=1024)


def _load_span_file(path: str) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            spans = [
                spanmetrics.LabeledSpan(s["start"], s["end"], EditCategory.from_json(s["category"]))
                for s in obj["spans"]
            ]
            rows.append({"id": obj["id"], "text_length": obj["text_length"], "spans": spans})
    return rows


def _load_jsonl(path: str) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                rows.append(json.loads(line))
    return rows


def _load_texts(path: str) -> list[str]:
    if path.endswith(".jsonl"):
        return [r["text"] for r in _load_jsonl(path)]
    with open(path, encoding="utf-8") as f:
        return [line.rstrip("\n") for line in f if line.strip()]


# ---------------------------------------------------------------------------
# analytics commands
# ---------------------------------------------------------------------------


def cmd_stats(args) -> int:
    records = load_corpus(args.corpus)
    if not records:
        raise CliError("empty corpus")
    stats = editops.corpus_stats(records, meaning_threshold=args.threshold)
    paths = reporting.write_stats_report(stats, _out_dir(args))
    r = stats.pearson_r_distance_iwqs
    print(
        f"stats: {len(records)} paragraphs, "
        f"{sum(p.n_edits for p in stats.edit_distance_per_paragraph)} live edits, "
        f"pearson r={'n/a' if r is None else f'{r:.3f}'} -> {paths[0].parent}"
    )
    return 0


def cmd_precision(args) -> int:
    pred = {row["id"]: row for row in _load_span_file(args.pred)}
    gold = {row["id"]: row for row in _load_span_file(args.gold)}
    missing = sorted(set(pred) - set(gold))
    if missing:
        raise CliError(f"ids missing from gold file: {missing[:5]}")
    rows = []
    for rid in pred:
        result = spanmetrics.precision(
            pred[rid]["spans"], gold[rid]["spans"], pred[rid]["text_length"]
        )
        rows.append({
            "id": rid,
            "general": result.general,
            "categorical": result.categorical,
            "predicted_chars": result.predicted_chars,
            "overlap_chars": result.overlap_chars,
        })
        print(f"{rid}: general {fmt2(result.general)} / categorical {fmt2(result.categorical)}")
    mean_general = sum(r["general"] for r in rows) / len(rows)
    mean_categorical = sum(r["categorical"] for r in rows) / len(rows)
    if args.out:
        reporting.write_precision_report(rows, mean_general, mean_categorical, _out_dir(args))
    print(
        f"precision: mean general {fmt2(mean_general)} / categorical "
        f"{fmt2(mean_categorical)} over {len(rows)} paragraphs"
    )
    return 0


def cmd_agreement(args) -> int:
    rows = []
    for obj in _load_jsonl(args.annotations):
        annotations = {
            annotator: [
                spanmetrics.LabeledSpan(s["start"], s["end"], EditCategory.from_json(s["category"]))
                for s in spans
            ]
            for annotator, spans in obj["annotations"].items()
        }
        rows.append({
            "id": obj["id"],
            "general": spanmetrics.pairwise_agreement(annotations, obj["text_length"]),
            "categorical": spanmetrics.pairwise_agreement(
                annotations, obj["text_length"], categorical=True
            ),
            "n_annotators": len(annotations),
        })
    if not rows:
        raise CliError("no annotation rows")
    if args.out:
        reporting.write_agreement_report(rows, _out_dir(args))
    key = "categorical" if args.categorical else "general"
    mean = sum(r[key] for r in rows) / len(rows)
    print(f"agreement ({key}, ordered pairs): mean {fmt2(mean)} over {len(rows)} paragraphs")
    return 0


def cmd_mine_templates(args) -> int:
    lengths = {int(n) for n in args.lengths.split(",")}
    llm = idiom.extract_templates(idiom.load_tagged(args.llm), lengths)
    human = idiom.extract_templates(idiom.load_tagged(args.human), lengths)
    reports = idiom.contrast_templates(llm, human, top_k=args.top_k, rarity_ratio=args.rarity_ratio)
    metadata = {
        "lengths": sorted(lengths),
        "top_k": args.top_k,
        "rarity_ratio": args.rarity_ratio,
        "note": "rarity_ratio is a parameter; flagged = human_doc_fraction < ratio * llm_doc_fraction",
    }
    paths = reporting.write_template_report(reports, _out_dir(args), metadata)
    print(f"mine-templates: {len(reports)} of top-{args.top_k} templates flagged -> {paths[0].parent}")
    return 0


def cmd_mine_lexical(args) -> int:
    phrases = None
    if args.phrases:
        with open(args.phrases, encoding="utf-8") as f:
            phrases = [ln.strip() for ln in f if ln.strip() and not ln.startswith("#")]
    rows = idiom.contrast_lexical(
        _load_texts(args.llm),
        _load_texts(args.human),
        min_llm_fraction=args.min_llm_fraction,
        max_human_fraction=args.max_human_fraction,
        phrases=phrases,
    )
    metadata = {
        "min_llm_fraction": args.min_llm_fraction,
        "max_human_fraction": args.max_human_fraction,
    }
    paths = reporting.write_lexical_report(rows, _out_dir(args), metadata)
    print(f"mine-lexical: {len(rows)} terms flagged -> {paths[0].parent}")
    return 0


def cmd_prefs(args) -> int:
    judgments = evalstats.load_judgments(args.judgments)
    if not judgments:
        raise CliError("no judgments")
    ranks = evalstats.average_ranks(judgments)
    rank_counts: dict[str, list[int]] = {}
    for j in judgments:
        for cond, rank in j.rank_of_condition.items():
            rank_counts.setdefault(cond, [0, 0, 0])[rank - 1] += 1
    try:
        agreement = evalstats.mean_agreement(judgments).to_json()
    except evalstats.EvalStatsError as exc:
        agreement = {"mean_w": None, "note": str(exc)}
    wilcoxon_rows = []
    for condition in ("WriterEdited", "LLMEditedFull", "LLMEditedOracle"):
        pairs = [
            (j.rank_of_condition[condition], j.rank_of_condition["LLMGenerated"])
            for j in judgments
            if condition in j.rank_of_condition
        ]
        if not pairs:
            continue
        result = evalstats.wilcoxon_signed_rank(pairs)
        wilcoxon_rows.append({
            "comparison": f"{condition} vs LLMGenerated",
            "statistic": result.statistic,
            "p_value": result.p_value,
            "n": result.n,
            "method": result.method,
        })
    paths = reporting.write_prefs_report(ranks, rank_counts, agreement, wilcoxon_rows, _out_dir(args))
    summary = ", ".join(f"{c}={v:.2f}" for c, v in sorted(ranks.items()))
    print(f"prefs: {len(judgments)} judgments, average ranks {summary} -> {paths[0].parent}")
    return 0


# ---------------------------------------------------------------------------
# pipeline commands
# ---------------------------------------------------------------------------


def cmd_backtranslate(args) -> int:
    provider = _provider(args)
    config = _config(args)
    out = _out_dir(args)
    path = out / "instructions.jsonl"
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for row in _load_jsonl(args.seeds):
            instruction = pipeline.backtranslate_instruction(row["paragraph"], provider, config)
            f.write(json.dumps({"id": row["id"], "instruction": instruction}, ensure_ascii=False) + "\n")
            n += 1
    print(f"backtranslate: {n} instructions -> {path}")
    return 0


def cmd_generate(args) -> int:
    provider = _provider(args)
    config = _config(args)
    venue = pipeline.get_venue(args.venue)
    out = _out_dir(args)
    path = out / "generated.jsonl"
    records = []
    for row in _load_jsonl(args.instructions):
        response = pipeline.generate_response(row["instruction"], venue, provider, config)
        records.append(
            AnnotatedParagraph(
                record=ParagraphRecord(
                    id=row["id"],
                    genre=pipeline.VENUE_GENRE[venue.name],
                    venue=venue.name.value,
                    seed_paragraph=row.get("seed_paragraph"),
                    instruction=row["instruction"],
                    generator=config.model,
                    response=response,
                    split=Split(args.split),
                )
            )
        )
    save_corpus(records, path)
    print(f"generate: {len(records)} responses ({venue.name.value}) -> {path}")
    return 0


def _train_exemplars(args, config):
    train = load_corpus(args.train)
    detection = None
    if getattr(args, "shots", None):
        detection = pipeline.sample_detection_exemplars(train, args.shots, config.seed)
    rewrites = pipeline.sample_rewrite_exemplars(
        train, config.rewrite_examples_per_category, config.seed
    )
    return detection, rewrites


def cmd_detect(args) -> int:
    provider = _provider(args)
    config = _config(args)
    detection, _ = _train_exemplars(args, config)
    out = _out_dir(args)
    path = out / "detections.jsonl"
    n_spans = 0
    with open(path, "w", encoding="utf-8") as f:
        for para in load_corpus(args.corpus):
            diagnostics: list[str] = []
            spans = pipeline.detect_spans(
                para.record.response, provider, args.shots, detection, config, diagnostics
            )
            n_spans += len(spans)
            f.write(json.dumps({
                "id": para.record.id,
                "spans": [
                    {
                        "start": s.resolved[0],
                        "end": s.resolved[1],
                        "raw_span": s.raw_span,
                        "category": s.category.to_json(),
                    }
                    for s in spans
                ],
                "diagnostics": diagnostics,
            }, ensure_ascii=False) + "\n")
    print(f"detect: {n_spans} spans ({args.shots}-shot) -> {path}")
    return 0


def cmd_rewrite(args) -> int:
    provider = _provider(args)
    config = _config(args)
    _, rewrites = _train_exemplars(args, config)
    out = _out_dir(args)
    path = out / "rewrites.jsonl"
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for row in _load_jsonl(args.spans):
            category = EditCategory.from_json(row["category"])
            span = pipeline.SpanPrediction(
                raw_span=row["paragraph"][row["start"]:row["end"]],
                category=category,
                resolved=(row["start"], row["end"]),
            )
            replacement = pipeline.rewrite_span(
                row["paragraph"], span, rewrites.get(category.name, []), provider, config
            )
            f.write(json.dumps({**row, "replacement": replacement}, ensure_ascii=False) + "\n")
            n += 1
    print(f"rewrite: {n} spans -> {path}")
    return 0


def cmd_edit(args) -> int:
    provider = _provider(args)
    config = _config(args)
    detection, rewrites = _train_exemplars(args, config)
    records = load_corpus(args.corpus)
    out = _out_dir(args)
    path = out / "edited.jsonl"
    n_edits = 0
    n_boundary = 0
    with open(path, "w", encoding="utf-8") as f:
        for para in records:
            if args.mode == "oracle":
                mode = pipeline.spans_from_edits(para.edits, para.record.response)
            else:
                mode = pipeline.FullDetect(shots=args.shots, exemplars=tuple(detection))
            para_config = config
            if args.match_generator:
                # edit each paragraph with the model that generated it
                para_config = dataclasses.replace(config, model=para.record.generator)
            diagnostics: list[str] = []
            edited = pipeline.edit_paragraph(
                para.record.response,
                provider,
                mode,
                para_config,
                rewrites,
                record_id=para.record.id,
                diagnostics=diagnostics,
            )
            n_edits += len(edited.edits)
            n_boundary += sum(1 for d in diagnostics if d.startswith("boundary:"))
            f.write(json.dumps(edited.to_json(), ensure_ascii=False) + "\n")
    print(
        f"edit: {len(records)} paragraphs, {n_edits} edits "
        f"({args.mode} mode, {n_boundary} boundary warnings) -> {path}"
    )
    return 0


def cmd_serve(args) -> int:
    records = load_corpus(args.corpus)
    triplets = annotsvc.load_triplets(args.triplets) if args.triplets else []
    if args.config:
        with open(args.config, encoding="utf-8") as f:
            config = annotsvc.ServiceConfig.from_json(json.load(f))
    else:
        config = annotsvc.ServiceConfig(
            annotators=tuple(args.annotators.split(",")) if args.annotators else (),
            judges=tuple(args.judges.split(",")) if args.judges else (),
        )
    service = annotsvc.AnnotationService(
        paragraphs=[p.record for p in records],
        triplets=triplets,
        config=config,
        log_path=args.log,
    )
    app = annotsvc.create_app(service, static_dir=args.static)
    import uvicorn

    print(f"serve: {len(records)} paragraphs, {len(triplets)} triplets on "
          f"{args.host}:{args.port} (log: {args.log})")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lamp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="corpus edit statistics, CSV/JSON + figures")
    p.add_argument("corpus")
    p.add_argument("--out", default="out")
    p.add_argument("--threshold", type=float, default=editops.DEFAULT_MEANING_THRESHOLD,
                   help="meaning-preservation similarity threshold")
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("precision", help="span precision of predictions against gold")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_precision)

    p = sub.add_parser("agreement", help="multi-annotator span agreement")
    p.add_argument("annotations")
    p.add_argument("--out", default=None)
    p.add_argument("--categorical", action="store_true")
    p.set_defaults(fn=cmd_agreement)

    p = sub.add_parser("mine-templates", help="POS-template contrast mining")
    p.add_argument("--llm", required=True)
    p.add_argument("--human", required=True)
    p.add_argument("--lengths", default="5,6,7,8")
    p.add_argument("--top-k", type=int, default=50)
    p.add_argument("--rarity-ratio", type=float, default=idiom.DEFAULT_RARITY_RATIO)
    p.add_argument("--out", default="out")
    p.set_defaults(fn=cmd_mine_templates)

    p = sub.add_parser("mine-lexical", help="lexical over-use contrast")
    p.add_argument("--llm", required=True)
    p.add_argument("--human", required=True)
    p.add_argument("--min-llm-fraction", type=float, default=0.05)
    p.add_argument("--max-human-fraction", type=float, default=0.01)
    p.add_argument("--phrases", default=None)
    p.add_argument("--out", default="out")
    p.set_defaults(fn=cmd_mine_lexical)

    p = sub.add_parser("prefs", help="preference-ranking statistics")
    p.add_argument("judgments")
    p.add_argument("--out", default="out")
    p.set_defaults(fn=cmd_prefs)

    p = sub.add_parser("backtranslate", help="instructions from seed paragraphs")
    p.add_argument("seeds")
    p.add_argument("--out", default="out")
    _add_provider_flags(p)
    p.set_defaults(fn=cmd_backtranslate)

    p = sub.add_parser("generate", help="venue-conditioned responses")
    p.add_argument("instructions")
    p.add_argument("--venue", required=True,
                   choices=[v.value for v in pipeline.VenueName])
    p.add_argument("--split", default="Test", choices=["Train", "Test"])
    p.add_argument("--out", default="out")
    _add_provider_flags(p)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("detect", help="few-shot problematic-span detection")
    p.add_argument("corpus")
    p.add_argument("--train", required=True)
    p.add_argument("--shots", type=int, default=5, choices=list(pipeline.DETECTION_SHOTS))
    p.add_argument("--out", default="out")
    _add_provider_flags(p)
    p.set_defaults(fn=cmd_detect)

    p = sub.add_parser("rewrite", help="category-specific span rewriting")
    p.add_argument("spans")
    p.add_argument("--train", required=True)
    p.add_argument("--out", default="out")
    _add_provider_flags(p)
    p.set_defaults(fn=cmd_rewrite)

    p = sub.add_parser("edit", help="two-stage paragraph editing")
    p.add_argument("corpus")
    p.add_argument("--train", required=True)
    p.add_argument("--mode", required=True, choices=["oracle", "full"])
    p.add_argument("--shots", type=int, default=5, choices=list(pipeline.DETECTION_SHOTS))
    p.add_argument("--match-generator", action="store_true",
                   help="edit each paragraph with its own generator model")
    p.add_argument("--out", default="out")
    _add_provider_flags(p)
    p.set_defaults(fn=cmd_edit)

    p = sub.add_parser("serve", help="annotation + preference ranking service")
    p.add_argument("--corpus", required=True)
    p.add_argument("--triplets", default=None)
    p.add_argument("--log", required=True)
    p.add_argument("--config", default=None, help="JSON service config")
    p.add_argument("--annotators", default=None, help="comma-separated annotator ids")
    p.add_argument("--judges", default=None, help="comma-separated judge ids")
    p.add_argument("--static", default=None, help="built UI directory to host at /")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (CliError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
