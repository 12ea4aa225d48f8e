from __future__ import annotations

import pytest

from lamp.corpus import (
    AnnotatedParagraph,
    EditCategory,
    EditSpan,
    Genre,
    ParagraphRecord,
    QualityScores,
    Split,
)

FIXTURES = __import__("pathlib").Path(__file__).parent / "fixtures"


def make_record(rid: str, response: str, split: Split = Split.TEST, **kwargs) -> ParagraphRecord:
    defaults = dict(
        genre=Genre.FICTION,
        venue="NewYorkerFiction",
        seed_paragraph=None,
        instruction="Write a paragraph.",
        generator="test-model",
    )
    defaults.update(kwargs)
    return ParagraphRecord(id=rid, response=response, split=split, **defaults)


def make_edit(
    text: str,
    start: int,
    end: int,
    replacement: str,
    category: EditCategory,
    annotator: str = "w1",
    order_index: int = 0,
    undone: bool = False,
) -> EditSpan:
    return EditSpan(
        start=start,
        end=end,
        original=text[start:end],
        replacement=replacement,
        category=category,
        annotator=annotator,
        order_index=order_index,
        undone=undone,
    )


def make_paragraph(
    rid: str,
    response: str,
    edits: tuple[EditSpan, ...] = (),
    scores: QualityScores | None = None,
    **kwargs,
) -> AnnotatedParagraph:
    return AnnotatedParagraph(record=make_record(rid, response, **kwargs), edits=edits, scores=scores)


@pytest.fixture
def fixtures_dir():
    return FIXTURES
