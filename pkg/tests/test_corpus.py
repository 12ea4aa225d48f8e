from __future__ import annotations

import json

import pytest

from lamp.corpus import (
    CLICHE,
    PURPLE_PROSE,
    AnnotatedParagraph,
    CorpusError,
    EditCategory,
    EditSpan,
    QualityScores,
    Split,
    load_corpus,
    save_corpus,
    split_corpus,
)

from conftest import make_edit, make_paragraph, make_record


def test_load_empty_file(tmp_path):
    path = tmp_path / "corpus.jsonl"
    path.write_text("")
    assert load_corpus(path) == []


def test_load_single_record_validates_offsets(tmp_path):
    text = "The night was dark and stormy, as always."
    para = make_paragraph(
        "p1", text,
        edits=(make_edit(text, 14, 29, "unremarkable", CLICHE),),
        scores=QualityScores(4, 7, "w1"),
    )
    path = tmp_path / "corpus.jsonl"
    save_corpus([para], path)
    loaded = load_corpus(path)
    assert len(loaded) == 1
    assert loaded[0] == para
    edit = loaded[0].edits[0]
    assert text[edit.start:edit.end] == edit.original


def test_corrupted_original_rejected_with_id_and_offsets(tmp_path):
    text = "The night was dark and stormy, as always."
    para = make_paragraph("p9", text, edits=(make_edit(text, 14, 29, "plain", CLICHE),))
    obj = para.to_json()
    obj["edits"][0]["original"] = "dark and STORMY"  # corrupt the stored text
    path = tmp_path / "corpus.jsonl"
    path.write_text(json.dumps(obj) + "\n")
    with pytest.raises(CorpusError) as err:
        load_corpus(path)
    message = str(err.value)
    assert "p9" in message and "14" in message and "29" in message


def test_malformed_line_names_line_number(tmp_path):
    path = tmp_path / "corpus.jsonl"
    good = json.dumps(make_paragraph("p1", "Some text.").to_json())
    path.write_text(good + "\n{not json\n")
    with pytest.raises(CorpusError, match="line 2"):
        load_corpus(path)


def test_duplicate_ids_rejected(tmp_path):
    para = make_paragraph("dup", "Some text.")
    path = tmp_path / "corpus.jsonl"
    save_corpus([para, para], path)
    with pytest.raises(CorpusError, match="dup"):
        load_corpus(path)


def test_round_trip_multibyte_and_newlines(tmp_path):
    text = "I \U0001D11E saw it.\nShe 👍 agreed — твёрдо."
    para = make_paragraph(
        "p2", text,
        edits=(make_edit(text, 2, 3, "🎵", PURPLE_PROSE),),
        scores=QualityScores(2, 9, "wŵ"),
    )
    path = tmp_path / "corpus.jsonl"
    save_corpus([para], path)
    assert load_corpus(path) == [para]
    # byte-exact over a second round trip
    first = path.read_bytes()
    save_corpus(load_corpus(path), path)
    assert path.read_bytes() == first
    # exactly one line despite the embedded newline
    assert first.decode("utf-8").strip().count("\n") == 0


def test_offsets_are_scalar_values_not_bytes():
    # The 4-byte treble clef occupies one scalar value position.
    text = "x\U0001D11Ey rest"
    edit = make_edit(text, 1, 2, "", CLICHE)
    assert edit.original == "\U0001D11E"
    make_paragraph("p3", text, edits=(edit,))  # validates


def test_empty_response_rejected():
    with pytest.raises(CorpusError, match="response"):
        make_record("p4", "")


def test_category_other_requires_name():
    with pytest.raises(CorpusError):
        EditCategory("Other")
    other = EditCategory.other("Mixed Metaphors")
    assert other.to_json() == {"other": "Mixed Metaphors"}
    assert EditCategory.from_json({"other": "Mixed Metaphors"}) == other
    with pytest.raises(CorpusError):
        EditCategory.from_json("NotACategory")


def test_both_empty_edit_rejected():
    with pytest.raises(CorpusError):
        EditSpan(0, 1, "", "", CLICHE, "w1", 0)


def test_overlapping_live_edits_rejected():
    text = "abcdefghij"
    edits = (
        make_edit(text, 0, 5, "X", CLICHE, order_index=0),
        make_edit(text, 3, 8, "Y", CLICHE, order_index=1),
    )
    with pytest.raises(CorpusError, match="overlap"):
        make_paragraph("p5", text, edits=edits)
    # the same pair is fine once the first is undone
    edits = (
        make_edit(text, 0, 5, "X", CLICHE, order_index=0, undone=True),
        make_edit(text, 3, 8, "Y", CLICHE, order_index=1),
    )
    para = make_paragraph("p5", text, edits=edits)
    assert len(para.live_edits) == 1


def test_order_index_strictly_increasing():
    text = "abcdefghij"
    edits = (
        make_edit(text, 0, 2, "X", CLICHE, order_index=1),
        make_edit(text, 5, 7, "Y", CLICHE, order_index=1),
    )
    with pytest.raises(CorpusError, match="order_index"):
        make_paragraph("p6", text, edits=edits)


def test_scores_validate_range():
    with pytest.raises(CorpusError):
        QualityScores(0, 5, "w1")
    with pytest.raises(CorpusError):
        QualityScores(5, 11, "w1")


def test_split_corpus_partition():
    records = [make_paragraph(f"p{i}", "text here") for i in range(10)]
    train, test = split_corpus(records, {"p1", "p4"})
    assert [p.record.id for p in train] == ["p1", "p4"]
    assert len(train) + len(test) == len(records)
    assert not {p.record.id for p in train} & {p.record.id for p in test}
    # empty and full splits
    train, test = split_corpus(records, set())
    assert (len(train), len(test)) == (0, 10)
    train, test = split_corpus(records, {p.record.id for p in records})
    assert (len(train), len(test)) == (10, 0)


def test_split_corpus_paper_scale():
    records = [make_paragraph(f"p{i:04d}", "text here") for i in range(1057)]
    train_ids = {f"p{i:04d}" for i in range(146)}
    train, test = split_corpus(records, train_ids)
    assert (len(train), len(test)) == (146, 911)


def test_split_corpus_unknown_id():
    records = [make_paragraph("p1", "text here")]
    with pytest.raises(CorpusError, match="nope"):
        split_corpus(records, {"nope"})


def test_save_three_records_three_lines(tmp_path):
    records = [make_paragraph(f"p{i}", "text here") for i in range(3)]
    path = tmp_path / "c.jsonl"
    save_corpus(records, path)
    assert len(path.read_text().splitlines()) == 3


def test_save_empty_corpus(tmp_path):
    path = tmp_path / "c.jsonl"
    save_corpus([], path)
    assert path.read_text() == ""


def test_scores_null_round_trip(tmp_path):
    para = make_paragraph("p1", "text here")
    path = tmp_path / "c.jsonl"
    save_corpus([para], path)
    line = json.loads(path.read_text())
    assert line["scores"] is None
    assert load_corpus(path)[0].scores is None


def test_split_values_on_wire(tmp_path):
    para = make_paragraph("p1", "text here", split=Split.TRAIN)
    path = tmp_path / "c.jsonl"
    save_corpus([para], path)
    assert json.loads(path.read_text())["split"] == "Train"
