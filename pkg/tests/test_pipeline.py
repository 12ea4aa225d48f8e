from __future__ import annotations

import json

import pytest

from lamp import pipeline
from lamp.corpus import CATEGORY_DISPLAY, CLICHE, EditCategory, load_corpus
from lamp.editops import apply_edits
from lamp.llmclient import ReplayProvider
from lamp.pipeline import (
    DetectionExemplar,
    DetectionParseError,
    FullDetect,
    MalformedRewriteError,
    PipelineConfig,
    PipelineError,
    RewriteExemplar,
    SpanPrediction,
    boundary_violations,
    build_detection_prompt,
    build_generation_prompt,
    build_backtranslation_prompt,
    build_rewrite_prompt,
    edit_paragraph,
    get_venue,
    parse_detection_output,
    parse_rewrite_output,
    resolve_span,
    sample_detection_exemplars,
    sample_rewrite_exemplars,
    spans_from_edits,
)

SEED = 7
SHOTS = 2
CONFIG = PipelineConfig(model="scripted-model", seed=SEED)


@pytest.fixture(scope="module")
def train(fixtures_dir_module):
    return load_corpus(fixtures_dir_module / "pipeline_train.jsonl")


@pytest.fixture(scope="module")
def fixtures_dir_module():
    import pathlib

    return pathlib.Path(__file__).parent / "fixtures"


@pytest.fixture(scope="module")
def corpus(fixtures_dir_module):
    return load_corpus(fixtures_dir_module / "pipeline_corpus.jsonl")


@pytest.fixture()
def replay(fixtures_dir_module):
    return ReplayProvider(fixtures_dir_module / "pipeline_replay.jsonl")


# -- prompt construction --------------------------------------------------------


def test_backtranslation_prompt_byte_exact():
    prompt = build_backtranslation_prompt("A paragraph about rain.")
    assert prompt == (
        "Summarize this paragraph into a single sentence open-ended question.\n"
        "A paragraph about rain.\n"
    )


def test_backtranslation_rejects_empty():
    with pytest.raises(PipelineError):
        build_backtranslation_prompt("")


def test_generation_prompt_substitution():
    venue = get_venue("NYTTravel")
    prompt = build_generation_prompt("Where should I eat in Lisbon?", venue)
    assert "New York Times Travel section" in prompt
    assert prompt.endswith("Where should I eat in Lisbon?\n")
    assert "{{instruction}}" not in prompt


def test_unknown_venue_rejected():
    with pytest.raises(ValueError):
        get_venue("NYTSports")


def test_all_venues_load():
    for name in pipeline.VenueName:
        venue = get_venue(name)
        assert "{{instruction}}" in venue.prompt_template


def test_detection_prompt_block_count(train):
    exemplars = sample_detection_exemplars(train, SHOTS, SEED)
    prompt = build_detection_prompt(exemplars, SHOTS, "Target text.")
    assert prompt.count("Example ") == 2
    assert prompt.rstrip().endswith("Target text.")


def test_detection_prompt_contains_all_seven_taxonomy_names(train):
    exemplars = sample_detection_exemplars(train, SHOTS, SEED)
    prompt = build_detection_prompt(exemplars, SHOTS, "Target text.")
    for display in CATEGORY_DISPLAY.values():
        assert f'"{display}"' in prompt


def test_detection_prompt_contains_rules(train):
    exemplars = sample_detection_exemplars(train, SHOTS, SEED)
    prompt = build_detection_prompt(exemplars, SHOTS, "Target text.")
    assert "Spans should not overlap" in prompt
    assert "Single Category" in prompt
    assert "must be verbatim" in prompt


def test_detection_prompt_insufficient_exemplars(train):
    exemplars = sample_detection_exemplars(train, 2, SEED)
    with pytest.raises(PipelineError, match="exemplars"):
        build_detection_prompt(exemplars, 5, "Target.")


def test_rewrite_prompt_shape(train):
    exemplars = sample_rewrite_exemplars(train, 25, SEED)["Cliche"]
    assert 1 <= len(exemplars) <= 25
    text = "It was the calm before the storm again."
    start, end = 7, 32
    prompt = build_rewrite_prompt(CLICHE, exemplars, text, start, end)
    assert f"<span>{text[start:end]}</span>" in prompt
    assert f'Original Span: "{text[start:end]}"' in prompt
    assert prompt.rstrip().endswith("Edited Span:")
    assert f"examples of {len(exemplars)} paragraphs" in prompt


def test_rewrite_prompt_other_category_rejected():
    with pytest.raises(PipelineError, match="Other"):
        build_rewrite_prompt(EditCategory.other("Melodrama"), [], "text", 0, 2)


def test_rewrite_templates_exist_for_all_seven(train):
    exemplars = sample_rewrite_exemplars(train, 25, SEED)
    for name in CATEGORY_DISPLAY:
        prompt = build_rewrite_prompt(EditCategory(name), exemplars[name], "some text", 0, 4)
        assert "Edited Span:" in prompt


# -- span resolution and output parsing -------------------------------------------


def test_resolve_exact():
    assert resolve_span("the quick brown fox", "quick brown") == (4, 15)


def test_resolve_whitespace_normalized():
    paragraph = "the night air was thick"
    start, end = resolve_span(paragraph, "night  air was")
    assert paragraph[start:end] == "night air was"


def test_resolve_lcs_ninety_percent():
    paragraph = "she heard the hum of traffic and the glow of billboards tonight"
    raw = "the hum of traffic and the glow of billboads"  # typo near the end
    start, end = resolve_span(paragraph, raw)
    assert paragraph[start:end] == "the hum of traffic and the glow of billboa"


def test_resolve_failure_returns_none():
    assert resolve_span("completely different text", "no such span here at all") is None
    assert resolve_span("abc", "") is None


def test_parse_detection_valid_disjoint():
    paragraph = "alpha beta gamma delta"
    raw = json.dumps([
        {"span": "alpha beta", "category": "Cliche"},
        {"span": "delta", "category": "Purple Prose"},
    ])
    spans = parse_detection_output(raw, paragraph)
    assert [s.resolved for s in spans] == [(0, 10), (17, 22)]
    assert spans[1].category.name == "PurpleProse"


def test_parse_detection_overlap_keeps_first():
    paragraph = "alpha beta gamma delta"
    raw = json.dumps([
        {"span": "alpha beta gamma", "category": "Cliche"},
        {"span": "beta gamma delta", "category": "Cliche"},
    ])
    diagnostics = []
    spans = parse_detection_output(raw, paragraph, diagnostics)
    assert len(spans) == 1
    assert spans[0].raw_span == "alpha beta gamma"
    assert any("overlap" in d for d in diagnostics)


def test_parse_detection_unknown_category_dropped():
    paragraph = "alpha beta gamma"
    raw = json.dumps([
        {"span": "alpha", "category": "Melodrama"},
        {"span": "gamma", "category": "Tense Consistency"},
    ])
    diagnostics = []
    spans = parse_detection_output(raw, paragraph, diagnostics)
    assert len(spans) == 1
    assert spans[0].category.name == "TenseInconsistency"
    assert any("Melodrama" in d for d in diagnostics)


def test_parse_detection_extracts_first_array_from_noise():
    paragraph = "alpha beta"
    raw = 'Sure! Here is the JSON:\n```json\n[{"span": "alpha", "category": "Cliche"}]\n```'
    spans = parse_detection_output(raw, paragraph)
    assert len(spans) == 1


def test_parse_detection_empty_array_is_legal():
    assert parse_detection_output("[]", "whatever") == []


def test_parse_detection_no_array_raises():
    with pytest.raises(DetectionParseError, match="no JSON array"):
        parse_detection_output("this is not json", "text")


def test_parse_rewrite_quoted():
    assert parse_rewrite_output('"a new phrase"') == "a new phrase"
    assert parse_rewrite_output('Edited Span: "a new phrase"') == "a new phrase"
    assert parse_rewrite_output('""') == ""


def test_parse_rewrite_missing_closing_quote():
    with pytest.raises(MalformedRewriteError):
        parse_rewrite_output('"no closing quote')
    with pytest.raises(MalformedRewriteError):
        parse_rewrite_output("no quotes at all")


def test_boundary_violation_checks():
    assert boundary_violations("The storm", "the storm") == ["leading character case class changed"]
    # a leading comma is both a punctuation and a case-class difference
    assert "leading punctuation presence changed" in boundary_violations(
        ", trailing clause", "new clause"
    )
    assert boundary_violations("ends with dot.", "ends without dot") == [
        "trailing punctuation presence changed"
    ]
    assert boundary_violations("same Shape.", "kept Shape.") == []
    assert boundary_violations("anything", "") == []  # deletions exempt


# -- sampling ----------------------------------------------------------------------


def test_sample_detection_exemplars_deterministic(train):
    a = sample_detection_exemplars(train, SHOTS, SEED)
    b = sample_detection_exemplars(train, SHOTS, SEED)
    assert a == b
    c = sample_detection_exemplars(train, SHOTS, SEED + 1)
    assert a != c


def test_sample_rewrite_exemplars_covers_all_categories(train):
    sampled = sample_rewrite_exemplars(train, 25, SEED)
    assert set(sampled) == set(CATEGORY_DISPLAY)
    for name, pool in sampled.items():
        assert pool, name
        for ex in pool:
            assert ex.paragraph[ex.start:ex.end] == ex.original


# -- end-to-end over the replay fixture ---------------------------------------------


def run_all(corpus, provider, mode_name, train):
    detection = sample_detection_exemplars(train, SHOTS, SEED)
    rewrites = sample_rewrite_exemplars(train, 25, SEED)
    outputs = []
    for para in corpus:
        if mode_name == "oracle":
            mode = spans_from_edits(para.edits, para.record.response)
        else:
            mode = FullDetect(shots=SHOTS, exemplars=tuple(detection))
        outputs.append(
            edit_paragraph(
                para.record.response, provider, mode, CONFIG, rewrites,
                record_id=para.record.id, diagnostics=[],
            )
        )
    return outputs


def test_pipeline_replay_matches_golden_both_modes(corpus, replay, train, fixtures_dir_module):
    for mode in ("oracle", "full"):
        outputs = run_all(corpus, replay, mode, train)
        got = "".join(json.dumps(o.to_json(), ensure_ascii=False) + "\n" for o in outputs)
        golden = (fixtures_dir_module / f"pipeline_golden_{mode}.jsonl").read_text("utf-8")
        assert got == golden, f"{mode} output diverged from golden bytes"


def test_pipeline_replay_deterministic_across_runs(corpus, train, fixtures_dir_module):
    runs = []
    for _ in range(2):
        provider = ReplayProvider(fixtures_dir_module / "pipeline_replay.jsonl")
        outputs = run_all(corpus, provider, "full", train)
        runs.append("".join(json.dumps(o.to_json(), ensure_ascii=False) + "\n" for o in outputs))
    assert runs[0] == runs[1]


def test_pipeline_outputs_satisfy_invariants(corpus, replay, train):
    for mode in ("oracle", "full"):
        for output in run_all(corpus, replay, mode, train):
            # verbatim post-resolution
            for e in output.edits:
                assert output.original[e.start:e.end] == e.original
            # non-overlap
            ordered = sorted(output.edits, key=lambda e: e.start)
            for a, b in zip(ordered, ordered[1:]):
                assert a.end <= b.start
            # constructive splice equality
            assert output.final == apply_edits(output.original, output.edits)


def test_zero_detected_spans_returns_original(corpus, replay, train):
    p18 = next(p for p in corpus if p.record.id == "p18")
    detection = sample_detection_exemplars(train, SHOTS, SEED)
    rewrites = sample_rewrite_exemplars(train, 25, SEED)
    output = edit_paragraph(
        p18.record.response, replay, FullDetect(shots=SHOTS, exemplars=tuple(detection)),
        CONFIG, rewrites, record_id="p18",
    )
    assert output.final == output.original
    assert output.edits == ()


def test_oracle_skips_other_category_with_diagnostic(corpus, replay, train):
    p19 = next(p for p in corpus if p.record.id == "p19")
    rewrites = sample_rewrite_exemplars(train, 25, SEED)
    diagnostics = []
    output = edit_paragraph(
        p19.record.response, replay,
        spans_from_edits(p19.edits, p19.record.response),
        CONFIG, rewrites, record_id="p19", diagnostics=diagnostics,
    )
    assert len(output.edits) == 1  # the Other span was skipped
    assert any("Other" in d for d in diagnostics)


def test_concurrent_rewrites_match_sequential(corpus, replay, train):
    para = next(p for p in corpus if len(p.live_edits) >= 1)
    rewrites = sample_rewrite_exemplars(train, 25, SEED)
    sequential = edit_paragraph(
        para.record.response, replay,
        spans_from_edits(para.edits, para.record.response), CONFIG, rewrites,
    )
    parallel_config = PipelineConfig(model="scripted-model", seed=SEED, jobs=4)
    parallel = edit_paragraph(
        para.record.response, replay,
        spans_from_edits(para.edits, para.record.response), parallel_config, rewrites,
    )
    assert sequential.final == parallel.final
    assert sequential.edits == parallel.edits


def test_edit_distribution_65_25_10(fixtures_dir_module, train):
    from lamp.editops import classify_edit_operation

    corpus = load_corpus(fixtures_dir_module / "dist_corpus.jsonl")
    provider = ReplayProvider(fixtures_dir_module / "dist_replay.jsonl")
    rewrites = sample_rewrite_exemplars(train, 25, SEED)
    counts = {"Replacement": 0, "Deletion": 0, "Insertion": 0}
    total = 0
    for para in corpus:
        output = edit_paragraph(
            para.record.response, provider,
            spans_from_edits(para.edits, para.record.response), CONFIG, rewrites,
            record_id=para.record.id,
        )
        for e in output.edits:
            counts[classify_edit_operation(e).value] += 1
            total += 1
    assert total == 200
    assert counts["Replacement"] / total == pytest.approx(0.65)
    assert counts["Deletion"] / total == pytest.approx(0.25)
    assert counts["Insertion"] / total == pytest.approx(0.10)


def test_rewrite_span_cliche_fixture(replay, train):
    # the canonical pair: a well-worn map becomes an old pocket map
    valley = (
        "Matthews had lived in the Valley all his life, and its rhythms and "
        "secrets were etched into his being like the lines on a well-worn map. "
        "He knew every corner of it."
    )
    span_text = "like the lines on a well-worn map"
    start = valley.index(span_text)
    span = SpanPrediction(raw_span=span_text, category=CLICHE,
                          resolved=(start, start + len(span_text)))
    exemplars = sample_rewrite_exemplars(train, 25, SEED)["Cliche"]
    got = pipeline.rewrite_span(valley, span, exemplars, replay, CONFIG)
    assert got == "like creases in an old pocket map"


def test_gen_fixture_backtranslate_and_generate(fixtures_dir_module):
    provider = ReplayProvider(fixtures_dir_module / "gen_replay.jsonl")
    seed_paragraph = json.loads(
        (fixtures_dir_module / "gen_seeds.jsonl").read_text("utf-8")
    )["paragraph"]
    instruction = pipeline.backtranslate_instruction(seed_paragraph, provider, CONFIG)
    assert instruction.startswith("Can you describe a vivid scene at sunset")
    response = pipeline.generate_response(
        instruction, get_venue("NewYorkerFiction"), provider, CONFIG)
    assert "water tower" in response
