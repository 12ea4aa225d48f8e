#!/usr/bin/env python3
"""Regenerate the committed pipeline replay fixtures and golden outputs.

Runs the real pipeline against a scripted provider in record mode, then
replays to write golden outputs. Everything except the recorded_at fixture
metadata (which replay ignores) is deterministic byte-for-byte.

Usage: python tools/make_fixtures.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from lamp import pipeline
from lamp.corpus import (
    AnnotatedParagraph,
    EditCategory,
    EditSpan,
    Genre,
    ParagraphRecord,
    QualityScores,
    Split,
    save_corpus,
)
from lamp.llmclient import RecordingProvider, ReplayProvider

FIXTURES = ROOT / "tests" / "fixtures"
SEED = 7
SHOTS = 2
MODEL = "scripted-model"

CATS = {name: EditCategory(name) for name in (
    "Cliche", "UnnecessaryRedundantExposition", "PurpleProse",
    "PoorSentenceStructure", "LackOfSpecificityAndDetail",
    "AwkwardWordChoiceAndPhrasing", "TenseInconsistency",
)}


class ScriptedProvider:
    """Deterministic provider: detection keyed by target paragraph, rewrites
    keyed by the target original span, everything else by the full prompt."""

    name = "scripted"

    def __init__(self, detection_plan=None, rewrite_plan=None, prompt_plan=None):
        self.detection_plan = detection_plan or {}
        self.rewrite_plan = rewrite_plan or {}
        self.prompt_plan = prompt_plan or {}

    def complete(self, request):
        prompt = request.user
        if prompt in self.prompt_plan:
            return self.prompt_plan[prompt]
        if prompt.startswith("You are given a paragraph of writing"):
            paragraph = prompt.rsplit("Paragraph:\n\n", 1)[1].rstrip("\n")
            return self.detection_plan[paragraph]
        marker = 'Original Span: "'
        idx = prompt.rfind(marker)
        if idx >= 0:
            rest = prompt[idx + len(marker):]
            span = rest[: rest.rfind('"')]
            return self.rewrite_plan[span]
        raise KeyError(f"no plan for prompt {prompt[:80]!r}")


def record(rid, text, split):
    return ParagraphRecord(
        id=rid, genre=Genre.FICTION, venue="NewYorkerFiction", seed_paragraph=None,
        instruction="Write a paragraph about the harbor.", generator="test-model",
        response=text, split=split,
    )


def edit(text, start, end, replacement, category, order_index=0, annotator="w1"):
    return EditSpan(start=start, end=end, original=text[start:end],
                    replacement=replacement, category=category,
                    annotator=annotator, order_index=order_index)


def paragraph_with_flaws(rid, prefix, flaws, suffix, split):
    """Assemble a paragraph and its writer edits; flaws are (text, category,
    writer_replacement) triples, never adjacent."""
    body = prefix
    placed = []
    for i, (flaw_text, category, writer) in enumerate(flaws):
        if i > 0:
            body += " Meanwhile, the afternoon went on. "
        start = len(body)
        body += flaw_text
        placed.append((start, start + len(flaw_text), category, writer))
    body += suffix
    edits = tuple(
        edit(body, s, e, writer, category, order_index=i)
        for i, (s, e, category, writer) in enumerate(placed)
    )
    para = AnnotatedParagraph(record=record(rid, body, split), edits=edits,
                              scores=QualityScores(4, 7, "w1"))
    return para


# ---------------------------------------------------------------------------
# Train corpus: >= 2 rewrite exemplars per category.
# ---------------------------------------------------------------------------

TRAIN = [
    ("t00", "Jonas kept the shop the way his father had. ",
     [("The silence was deafening in the empty aisles", CATS["Cliche"],
       "The aisles stayed quiet")],
     " He restocked the same four shelves every morning."),
    ("t01", "The committee met on Thursdays. ",
     [("Needless to say, everyone already knew the outcome of the vote",
       CATS["UnnecessaryRedundantExposition"], "")],
     " Minutes were kept anyway."),
    ("t02", "Rain came early that spring. ",
     [("The luminescent droplets cascaded in shimmering symphonies of silver",
       CATS["PurpleProse"], "Water ran off the gutters")],
     " The garden flooded twice."),
    ("t03", "Amaya read the letter twice. ",
     [("Being that it was late and because the trains had stopped and since no taxi would come, she stayed",
       CATS["PoorSentenceStructure"], "The trains had stopped. She stayed")],
     " The letter stayed open on the table."),
    ("t04", "He cooked dinner for six. ",
     [("The meal was good and everyone liked it", CATS["LackOfSpecificityAndDetail"],
       "The lamb fell off the bone; even Rosa, who never finished anything, asked for more")],
     " Nobody mentioned the burnt rice."),
    ("t05", "The ferry left at dawn. ",
     [("She seemed to watch the gulls utilize the thermals",
       CATS["AwkwardWordChoiceAndPhrasing"], "She watched the gulls ride the thermals")],
     " The crossing took an hour."),
    ("t06", "Grandfather tells the story every winter. ",
     [("He walked to the river and catches a fish", CATS["TenseInconsistency"],
       "He walked to the river and caught a fish")],
     " Nobody corrects him."),
    ("t07", "The orchard was sold in June. ",
     [("It was a bittersweet moment of mixed emotions", CATS["Cliche"], ""),
      ("In conclusion, the family obviously felt that the sale had been decided already",
       CATS["UnnecessaryRedundantExposition"], "The decision stood")],
     " The new owners kept the bees."),
    ("t08", "Her studio faced north. ",
     [("The gossamer light danced in ethereal cascades upon the canvas",
       CATS["PurpleProse"], "Flat light fell on the canvas")],
     " She painted until noon."),
    ("t09", "The interview ran long. ",
     [("Due to the fact that the recorder was broken meant the notes were what they had",
       CATS["PoorSentenceStructure"], "The recorder was broken, so notes were all they had"),
      ("The office was nice", CATS["LackOfSpecificityAndDetail"],
       "The office smelled of toner and oranges, and the chairs did not match")],
     " They published in May."),
    ("t10", "The choir practiced on Sundays. ",
     [("Voices seemed to emanate vibrations that were acoustically pleasant",
       CATS["AwkwardWordChoiceAndPhrasing"], "The harmonies carried"),
      ("Maria sings the descant and walked home alone", CATS["TenseInconsistency"],
       "Maria sang the descant and walked home alone")],
     " The roof leaked near the organ."),
]


# ---------------------------------------------------------------------------
# Test corpus: 20 paragraphs. 14 formulaic covering each category twice,
# then six special cases.
# ---------------------------------------------------------------------------

BASE = [
    ("Cliche", "the calm before the storm settled over the harbor (take {i})",
     "a dull stillness settled over the harbor", "a flat hush settled over the harbor"),
    ("UnnecessaryRedundantExposition",
     "which, as everyone knows, is how harbors have always been (take {i})",
     "", ""),  # rewritten to the empty string: a deletion
    ("PurpleProse", "an opalescent cathedral of mist enthroned upon the waters (take {i})",
     "mist on the water", "thick mist on the water"),
    ("PoorSentenceStructure",
     "and because the nets and owing to the tide and the boats being late they waited (take {i})",
     "The tide was late, so they waited", "The boats were late. They waited"),
    ("LackOfSpecificityAndDetail", "the market had many things for sale (take {i})",
     "crates of mackerel, rope by the meter, and radios missing their dials",
     "stalls of mackerel, coiled rope, and second-hand radios"),
    ("AwkwardWordChoiceAndPhrasing", "the vendors seemed to utilize a singsong cadence (take {i})",
     "the vendors sang out their prices", "the vendors called out in a singsong"),
    ("TenseInconsistency", "a gull lands on the mast and folded its wings (take {i})",
     "a gull landed on the mast and folded its wings",
     "a gull landed on the mast, folding its wings"),
]


def build_test_corpus():
    paragraphs = []
    detection_plan = {}
    rewrite_plan = {}

    display = {name: CATS[name].display for name in CATS}

    for i in range(14):
        cat_name, flaw_template, writer, machine = BASE[i % 7]
        flaw_text = flaw_template.format(i=f"{i:02d}")
        prefix = f"Entry {i:02d} from the harbor notebook. Before noon, "
        suffix = ". The ledger stayed open on the crate."
        para = paragraph_with_flaws(f"p{i:02d}", prefix,
                                    [(flaw_text, CATS[cat_name], writer)], suffix,
                                    Split.TEST)
        paragraphs.append(para)
        # detector finds the same span; every other Cliche uses the accented
        # alias to exercise category-name tolerance
        name = display[cat_name]
        if cat_name == "Cliche" and i % 14 == 7:
            name = "Cliché"
        detection_plan[para.record.response] = json.dumps(
            [{"span": flaw_text, "category": name}], ensure_ascii=False
        )
        rewrite_plan[flaw_text] = f'"{machine}"'

    # p14: detector emits a doubled space; needs whitespace-normalized match
    flaw_text = "the night air was thick with unspoken tension"
    para = paragraph_with_flaws(
        "p14", "Entry 14. After the storm warning, ",
        [(flaw_text, CATS["Cliche"], "the night air felt tense")],
        ". Nobody said much.", Split.TEST)
    paragraphs.append(para)
    fuzzy = "the night  air was thick with  unspoken tension"
    detection_plan[para.record.response] = json.dumps(
        [{"span": fuzzy, "category": "Cliche"}], ensure_ascii=False)
    rewrite_plan[flaw_text] = '"the air stayed tense"'

    # p15: detector makes a late typo; needs the LCS rung (>= 90% cover)
    flaw_text = "the hum of traffic and the glow of billboards"
    para = paragraph_with_flaws(
        "p15", "Entry 15. Across the bridge she heard ",
        [(flaw_text, CATS["PurpleProse"], "traffic and billboards")],
        ". The city did not sleep.", Split.TEST)
    paragraphs.append(para)
    typo = "the hum of traffic and the glow of billboads"  # missing 'r'
    detection_plan[para.record.response] = json.dumps(
        [{"span": typo, "category": "Purple Prose"}], ensure_ascii=False)
    resolved = pipeline.resolve_span(para.record.response, typo)
    assert resolved is not None
    # full mode rewrites the LCS-resolved substring, oracle the writer span
    rewrite_plan[para.record.response[resolved[0]:resolved[1]]] = '"traffic noise and billboard light"'
    rewrite_plan[flaw_text] = '"traffic noise and billboard light"'

    # p16: detector emits overlapping spans; the later one is dropped
    flaw_text = "every cloud had a silver lining over the docks"
    para = paragraph_with_flaws(
        "p16", "Entry 16. The foreman said ",
        [(flaw_text, CATS["Cliche"], "the weather would turn")],
        ". The crews kept loading.", Split.TEST)
    paragraphs.append(para)
    overlap = "a silver lining over the docks"
    detection_plan[para.record.response] = json.dumps(
        [{"span": flaw_text, "category": "Cliche"},
         {"span": overlap, "category": "Purple Prose"}], ensure_ascii=False)
    rewrite_plan[flaw_text] = '"the weather might turn"'

    # p17: one unknown category (dropped) plus one valid span
    flaw_text = "the sunset painted the sky in fiery hues"
    para = paragraph_with_flaws(
        "p17", "Entry 17. From the pier, ",
        [(flaw_text, CATS["Cliche"], "the sky went red")],
        ". The lamps came on one by one.", Split.TEST)
    paragraphs.append(para)
    detection_plan[para.record.response] = json.dumps(
        [{"span": "The lamps came on", "category": "Melodrama"},
         {"span": flaw_text, "category": "Cliche"}], ensure_ascii=False)
    rewrite_plan[flaw_text] = '"the sky dimmed to rust"'

    # p18: detector finds nothing; final == original
    para = paragraph_with_flaws(
        "p18", "Entry 18. The tide tables were posted at six",
        [(" and the harbormaster initialed each page", CATS["UnnecessaryRedundantExposition"], "")],
        ". That was the whole of it.", Split.TEST)
    paragraphs.append(para)
    detection_plan[para.record.response] = "[]"
    rewrite_plan[" and the harbormaster initialed each page"] = '""'

    # p19: emoji text; writer edits include an Other-category span that the
    # oracle rewriting path must skip (no template exists for it)
    body = "Entry 19. The crew cheered 🎉 when the nets came up full. "
    flaw_a = "It was, at the end of the day, a win for everyone involved"
    start_a = len(body)
    body += flaw_a
    body += ". Later the 🦀 crates were stacked twice as high"
    flaw_b = " which repeated the same structure again and again"
    start_b = len(body)
    body += flaw_b
    body += "."
    para = AnnotatedParagraph(
        record=record("p19", body, Split.TEST),
        edits=(
            edit(body, start_a, start_a + len(flaw_a), "Everyone won", CATS["Cliche"], 0),
            edit(body, start_b, start_b + len(flaw_b), "",
                 EditCategory.other("Repetitive Sentence Structure"), 1),
        ),
        scores=QualityScores(3, 8, "w1"),
    )
    paragraphs.append(para)
    detection_plan[para.record.response] = json.dumps(
        [{"span": flaw_a, "category": "Cliche"}], ensure_ascii=False)
    rewrite_plan[flaw_a] = '"Everyone got paid"'

    return paragraphs, detection_plan, rewrite_plan


# ---------------------------------------------------------------------------
# 200-paragraph oracle batch shaped to a 65/25/10 replace/delete/insert mix.
# ---------------------------------------------------------------------------


def build_dist_corpus():
    paragraphs = []
    rewrite_plan = {}
    ops = ["R"] * 130 + ["D"] * 50 + ["I"] * 20
    for i, op in enumerate(ops):
        flaw_text = f"the harbor kept its usual rhythm through shift {i:03d}"
        prefix = f"Log {i:03d}. "
        suffix = ". Nothing else of note."
        para = paragraph_with_flaws(f"d{i:03d}", prefix,
                                    [(flaw_text, CATS["Cliche"], "steady work")],
                                    suffix, Split.TEST)
        paragraphs.append(para)
        if op == "R":
            rewrite_plan[flaw_text] = f'"the shift {i:03d} passed without note"'
        elif op == "D":
            rewrite_plan[flaw_text] = '""'
        else:  # net +40 or more characters: classified as an insertion
            rewrite_plan[flaw_text] = (
                f'"the harbor kept its usual rhythm through shift {i:03d}, '
                f'from first bell to last, loaders and tally clerks and the '
                f'crane crew all holding their stations without pause"'
            )
    return paragraphs, rewrite_plan


# ---------------------------------------------------------------------------
# Generation fixture: backtranslation + venue responses.
# ---------------------------------------------------------------------------

SEED_PARAGRAPH = (
    "The sunset is a red-gold rumpus on the western sky. It has rained. The "
    "crow tosses itself from branch to branch, and she follows. The sky is "
    "clearing overhead. She feels tremendous."
)
BACKTRANSLATED = (
    "Can you describe a vivid scene at sunset that transitions into "
    "nighttime, incorporating elements of nature, urban surroundings, and "
    "personal observations?"
)
GENERATED = (
    "The light drops behind the water tower a little after eight. On the "
    "avenue, the bakery shutters come down and someone hoses the pavement. "
    "She counts windows as they go yellow, one by one, and the crow she has "
    "been following gives up on her at the corner. By the park the air "
    "smells of wet iron. She does not hurry. The streetlamps stutter on in "
    "pairs, north to south, and the sky keeps a last blue band above the "
    "rooftops for longer than seems fair. A bus passes, empty. She buys "
    "nothing at the bodega but stands a while in its doorway light. The "
    "night, when it finally commits, feels like a room with the lamps off "
    "rather than a curtain coming down. She lets herself be glad about the "
    "rain that already happened. Somewhere above, the first planet holds "
    "still. She walks the rest of the way without checking her phone."
)
TRAVEL_INSTRUCTION = (
    "How is Prague balancing its historical preservation with modern "
    "development while enhancing local amenities outside Old Town?"
)
TRAVEL_RESPONSE = (
    "Start in Karlin, where the flood-era warehouses now hold bakeries that "
    "sell out by ten. The district hall still wears its 1880s plaster, but "
    "the courtyards behind it have been glassed into studios and climbing "
    "gyms. Take the 8 tram two stops and the scaffolding tells the same "
    "story: restoration on the street side, additions in the back. Locals "
    "will point you to the riverside containers at Prazacka for coffee, and "
    "to the old slaughterhouse at Holesovice, where the market stalls share "
    "a roof with a concert hall. The castle crowds never make it here. City "
    "hall publishes its facade grants, so owners repaint rather than "
    "demolish. You can read the whole balance in one block: cobbles relaid "
    "by hand, a bike lane striped beside them, and a beer hall that has not "
    "changed its taps since before the war."
)


def build_gen_plan():
    venue = pipeline.get_venue("NYTTravel")
    fiction = pipeline.get_venue("NewYorkerFiction")
    return {
        pipeline.build_backtranslation_prompt(SEED_PARAGRAPH): BACKTRANSLATED,
        pipeline.build_generation_prompt(BACKTRANSLATED, fiction): GENERATED,
        pipeline.build_generation_prompt(TRAVEL_INSTRUCTION, venue): TRAVEL_RESPONSE,
    }


# ---------------------------------------------------------------------------


def run_edit_over(paragraphs, provider, config, mode, detection, rewrites):
    lines = []
    for para in paragraphs:
        if mode == "oracle":
            spans = pipeline.spans_from_edits(para.edits, para.record.response)
        else:
            spans = pipeline.FullDetect(shots=SHOTS, exemplars=tuple(detection))
        diagnostics = []
        edited = pipeline.edit_paragraph(
            para.record.response, provider, spans, config, rewrites,
            record_id=para.record.id, diagnostics=diagnostics,
        )
        lines.append(json.dumps(edited.to_json(), ensure_ascii=False))
    return lines


def main():
    FIXTURES.mkdir(parents=True, exist_ok=True)
    config = pipeline.PipelineConfig(model=MODEL, seed=SEED)

    train = [paragraph_with_flaws(rid, prefix, flaws, suffix, Split.TRAIN)
             for rid, prefix, flaws, suffix in TRAIN]
    save_corpus(train, FIXTURES / "pipeline_train.jsonl")

    test_corpus, detection_plan, rewrite_plan = build_test_corpus()
    save_corpus(test_corpus, FIXTURES / "pipeline_corpus.jsonl")

    detection = pipeline.sample_detection_exemplars(train, SHOTS, SEED)
    rewrites = pipeline.sample_rewrite_exemplars(train, 25, SEED)

    fixture_path = FIXTURES / "pipeline_replay.jsonl"
    fixture_path.unlink(missing_ok=True)
    scripted = ScriptedProvider(detection_plan, rewrite_plan)
    recorder = RecordingProvider(scripted, fixture_path)
    run_edit_over(test_corpus, recorder, config, "oracle", detection, rewrites)
    run_edit_over(test_corpus, recorder, config, "full", detection, rewrites)

    # the canonical cliché rewrite pair, recorded as a single-span call
    valley = (
        "Matthews had lived in the Valley all his life, and its rhythms and "
        "secrets were etched into his being like the lines on a well-worn map. "
        "He knew every corner of it."
    )
    span_text = "like the lines on a well-worn map"
    start = valley.index(span_text)
    span = pipeline.SpanPrediction(
        raw_span=span_text, category=CATS["Cliche"], resolved=(start, start + len(span_text)))
    cliche_provider = RecordingProvider(
        ScriptedProvider(rewrite_plan={span_text: '"like creases in an old pocket map"'}),
        fixture_path)
    got = pipeline.rewrite_span(valley, span, rewrites["Cliche"], cliche_provider, config)
    assert got == "like creases in an old pocket map"

    # one extra recording under the corpus generator model, so the CLI's
    # --match-generator path can be replayed (p18 detects zero spans)
    p18 = next(p for p in test_corpus if p.record.id == "p18")
    generator_config = pipeline.PipelineConfig(model=p18.record.generator, seed=SEED)
    run_edit_over([p18], recorder, generator_config, "full", detection, rewrites)

    replay = ReplayProvider(fixture_path)
    for mode in ("oracle", "full"):
        lines = run_edit_over(test_corpus, replay, config, mode, detection, rewrites)
        golden = FIXTURES / f"pipeline_golden_{mode}.jsonl"
        golden.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
        print(f"golden {mode}: {len(lines)} paragraphs")

    dist_corpus, dist_rewrites = build_dist_corpus()
    save_corpus(dist_corpus, FIXTURES / "dist_corpus.jsonl")
    dist_fixture = FIXTURES / "dist_replay.jsonl"
    dist_fixture.unlink(missing_ok=True)
    recorder = RecordingProvider(ScriptedProvider({}, dist_rewrites), dist_fixture)
    run_edit_over(dist_corpus, recorder, config, "oracle", None, rewrites)
    print(f"dist: {len(dist_corpus)} paragraphs")

    gen_fixture = FIXTURES / "gen_replay.jsonl"
    gen_fixture.unlink(missing_ok=True)
    gen_plan = build_gen_plan()
    recorder = RecordingProvider(ScriptedProvider(prompt_plan=gen_plan), gen_fixture)
    instruction = pipeline.backtranslate_instruction(SEED_PARAGRAPH, recorder, config)
    assert instruction == BACKTRANSLATED
    response = pipeline.generate_response(
        instruction, pipeline.get_venue("NewYorkerFiction"), recorder, config)
    assert response == GENERATED
    travel = pipeline.generate_response(
        TRAVEL_INSTRUCTION, pipeline.get_venue("NYTTravel"), recorder, config)
    assert travel == TRAVEL_RESPONSE
    # seeds file consumed by the backtranslate CLI command
    (FIXTURES / "gen_seeds.jsonl").write_text(
        json.dumps({"id": "seed-0", "paragraph": SEED_PARAGRAPH}, ensure_ascii=False) + "\n",
        encoding="utf-8")
    (FIXTURES / "gen_instructions.jsonl").write_text(
        json.dumps({"id": "seed-0", "instruction": TRAVEL_INSTRUCTION}, ensure_ascii=False) + "\n",
        encoding="utf-8")
    print("generation fixture done")


if __name__ == "__main__":
    main()
