"""Data model and JSONL persistence for edit-annotated writing corpora.

A corpus is a JSONL file, one record per line, each holding an
instruction/response pair, the span edits collected on the response, and the
before/after quality scores. All character offsets are Unicode scalar value
indices (Python string indices), never UTF-8/UTF-16 units, so the same file
validates identically everywhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable


class CorpusError(ValueError):
    """Raised for malformed corpus files or invariant violations."""


class Genre(str, Enum):
    FICTION = "Fiction"
    TRAVEL_WRITING = "TravelWriting"
    FOOD_WRITING = "FoodWriting"
    PERSONAL_ESSAY = "PersonalEssay"
    INTERNET_ADVICE = "InternetAdvice"


class Split(str, Enum):
    TRAIN = "Train"
    TEST = "Test"


# The seven closed taxonomy categories, in canonical wire-name form.
CATEGORY_NAMES = (
    "Cliche",
    "UnnecessaryRedundantExposition",
    "PurpleProse",
    "PoorSentenceStructure",
    "LackOfSpecificityAndDetail",
    "AwkwardWordChoiceAndPhrasing",
    "TenseInconsistency",
)

# Human-facing names, used in prompts and reports.
CATEGORY_DISPLAY = {
    "Cliche": "Cliche",
    "UnnecessaryRedundantExposition": "Unnecessary/Redundant Exposition",
    "PurpleProse": "Purple Prose",
    "PoorSentenceStructure": "Poor Sentence Structure",
    "LackOfSpecificityAndDetail": "Lack of Specificity and Detail",
    "AwkwardWordChoiceAndPhrasing": "Awkward Word Choice and Phrasing",
    "TenseInconsistency": "Tense Inconsistency",
}

_OTHER = "Other"


@dataclass(frozen=True)
class EditCategory:
    """One of the seven closed categories, or Other with a free-form name."""

    name: str
    other_name: str | None = None

    def __post_init__(self) -> None:
        if self.name == _OTHER:
            if not self.other_name:
                raise CorpusError("Other category requires a non-empty name")
        elif self.name in CATEGORY_NAMES:
            if self.other_name is not None:
                raise CorpusError(f"{self.name} must not carry an other_name")
        else:
            raise CorpusError(f"unknown edit category {self.name!r}")

    @classmethod
    def other(cls, name: str) -> "EditCategory":
        return cls(_OTHER, name)

    @property
    def is_other(self) -> bool:
        return self.name == _OTHER

    @property
    def display(self) -> str:
        return self.other_name if self.is_other else CATEGORY_DISPLAY[self.name]

    def to_json(self) -> object:
        return {"other": self.other_name} if self.is_other else self.name

    @classmethod
    def from_json(cls, value: object) -> "EditCategory":
        if isinstance(value, str):
            return cls(value)
        if isinstance(value, dict) and set(value) == {"other"}:
            return cls.other(value["other"])
        raise CorpusError(f"unrecognized category value {value!r}")


CLICHE = EditCategory("Cliche")
UNNECESSARY_EXPOSITION = EditCategory("UnnecessaryRedundantExposition")
PURPLE_PROSE = EditCategory("PurpleProse")
POOR_SENTENCE_STRUCTURE = EditCategory("PoorSentenceStructure")
LACK_OF_SPECIFICITY = EditCategory("LackOfSpecificityAndDetail")
AWKWARD_WORD_CHOICE = EditCategory("AwkwardWordChoiceAndPhrasing")
TENSE_INCONSISTENCY = EditCategory("TenseInconsistency")

THE_SEVEN = (
    CLICHE,
    UNNECESSARY_EXPOSITION,
    PURPLE_PROSE,
    POOR_SENTENCE_STRUCTURE,
    LACK_OF_SPECIFICITY,
    AWKWARD_WORD_CHOICE,
    TENSE_INCONSISTENCY,
)


@dataclass(frozen=True)
class EditSpan:
    """A single span edit: [start, end) replaced by `replacement`.

    `original` must equal the paragraph substring at [start, end); an empty
    replacement is a deletion. `order_index` is the chronological position in
    the annotator's session; undone edits stay in the record but are excluded
    from every analytic.
    """

    start: int
    end: int
    original: str
    replacement: str
    category: EditCategory
    annotator: str
    order_index: int
    undone: bool = False

    def __post_init__(self) -> None:
        if not (0 <= self.start < self.end):
            raise CorpusError(f"invalid span offsets [{self.start},{self.end})")
        if self.original == "" and self.replacement == "":
            raise CorpusError("edit with empty original and empty replacement")

    def to_json(self) -> dict:
        return {
            "start": self.start,
            "end": self.end,
            "original": self.original,
            "replacement": self.replacement,
            "category": self.category.to_json(),
            "annotator": self.annotator,
            "order_index": self.order_index,
            "undone": self.undone,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EditSpan":
        return cls(
            start=obj["start"],
            end=obj["end"],
            original=obj["original"],
            replacement=obj["replacement"],
            category=EditCategory.from_json(obj["category"]),
            annotator=obj["annotator"],
            order_index=obj["order_index"],
            undone=obj.get("undone", False),
        )


@dataclass(frozen=True)
class QualityScores:
    """Initial and final writing quality, 1..10, as given by one annotator."""

    iwqs: int
    fwqs: int
    annotator: str

    def __post_init__(self) -> None:
        for label, value in (("iwqs", self.iwqs), ("fwqs", self.fwqs)):
            if not (isinstance(value, int) and 1 <= value <= 10):
                raise CorpusError(f"{label} must be an integer in 1..10, got {value!r}")

    def to_json(self) -> dict:
        return {"iwqs": self.iwqs, "fwqs": self.fwqs, "annotator": self.annotator}

    @classmethod
    def from_json(cls, obj: dict) -> "QualityScores":
        return cls(iwqs=obj["iwqs"], fwqs=obj["fwqs"], annotator=obj["annotator"])


@dataclass(frozen=True)
class ParagraphRecord:
    id: str
    genre: Genre
    venue: str
    seed_paragraph: str | None
    instruction: str
    generator: str
    response: str
    split: Split

    def __post_init__(self) -> None:
        if not self.response:
            raise CorpusError(f"record {self.id!r}: response must be non-empty")

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "genre": self.genre.value,
            "venue": self.venue,
            "seed_paragraph": self.seed_paragraph,
            "instruction": self.instruction,
            "generator": self.generator,
            "response": self.response,
            "split": self.split.value,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ParagraphRecord":
        return cls(
            id=obj["id"],
            genre=Genre(obj["genre"]),
            venue=obj["venue"],
            seed_paragraph=obj.get("seed_paragraph"),
            instruction=obj["instruction"],
            generator=obj["generator"],
            response=obj["response"],
            split=Split(obj["split"]),
        )


@dataclass(frozen=True)
class AnnotatedParagraph:
    """A paragraph record plus the chronological edit log and scores.

    `scores` is None for records that have not been through annotation (for
    example fresh pipeline output); annotated records carry both scores.
    """

    record: ParagraphRecord
    edits: tuple[EditSpan, ...] = ()
    scores: QualityScores | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "edits", tuple(self.edits))
        validate_edits(self.record.id, self.record.response, self.edits)

    @property
    def live_edits(self) -> tuple[EditSpan, ...]:
        """Edits that have not been undone, the input to every analytic."""
        return tuple(e for e in self.edits if not e.undone)

    def to_json(self) -> dict:
        obj = self.record.to_json()
        obj["edits"] = [e.to_json() for e in self.edits]
        obj["scores"] = self.scores.to_json() if self.scores else None
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "AnnotatedParagraph":
        scores = obj.get("scores")
        return cls(
            record=ParagraphRecord.from_json(obj),
            edits=tuple(EditSpan.from_json(e) for e in obj.get("edits", [])),
            scores=QualityScores.from_json(scores) if scores else None,
        )


def validate_edits(record_id: str, text: str, edits: Iterable[EditSpan]) -> None:
    """Check every edit against its paragraph text.

    Raises CorpusError naming the record and field on the first violation:
    out-of-range offsets, original/substring mismatch, non-increasing
    order_index, or overlapping live edits.
    """
    edits = tuple(edits)
    last_order = None
    for e in edits:
        if e.end > len(text):
            raise CorpusError(
                f"record {record_id!r}: edit [{e.start},{e.end}) exceeds "
                f"paragraph length {len(text)}"
            )
        actual = text[e.start:e.end]
        if actual != e.original:
            raise CorpusError(
                f"record {record_id!r}: edit original at [{e.start},{e.end}) "
                f"does not match paragraph substring ({e.original!r} != {actual!r})"
            )
        if last_order is not None and e.order_index <= last_order:
            raise CorpusError(
                f"record {record_id!r}: order_index not strictly increasing "
                f"at {e.order_index}"
            )
        last_order = e.order_index
    live = sorted((e for e in edits if not e.undone), key=lambda e: e.start)
    for a, b in zip(live, live[1:]):
        if b.start < a.end:
            raise CorpusError(
                f"record {record_id!r}: live edits overlap: "
                f"[{a.start},{a.end}) and [{b.start},{b.end})"
            )


def dumps_record(paragraph: AnnotatedParagraph) -> str:
    return json.dumps(paragraph.to_json(), ensure_ascii=False)


def load_corpus(path: str | Path) -> list[AnnotatedParagraph]:
    """Load and validate a JSONL corpus, preserving file order."""
    records: list[AnnotatedParagraph] = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}: malformed JSON on line {lineno}: {exc}") from exc
            try:
                paragraph = AnnotatedParagraph.from_json(obj)
            except (KeyError, ValueError, TypeError) as exc:
                rid = obj.get("id", f"<line {lineno}>") if isinstance(obj, dict) else f"<line {lineno}>"
                raise CorpusError(f"{path}: line {lineno} (record {rid!r}): {exc}") from exc
            if paragraph.record.id in seen_ids:
                raise CorpusError(f"{path}: duplicate record id {paragraph.record.id!r}")
            seen_ids.add(paragraph.record.id)
            records.append(paragraph)
    return records


def save_corpus(records: Iterable[AnnotatedParagraph], path: str | Path) -> None:
    """Write records as JSONL; load_corpus(save_corpus(x)) == x."""
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(dumps_record(record))
            f.write("\n")


def split_corpus(
    records: list[AnnotatedParagraph], train_ids: set[str]
) -> tuple[list[AnnotatedParagraph], list[AnnotatedParagraph]]:
    """Partition records into (train, test) by id membership."""
    known = {r.record.id for r in records}
    unknown = train_ids - known
    if unknown:
        raise CorpusError(f"train ids not present in corpus: {sorted(unknown)[:5]}")
    train = [r for r in records if r.record.id in train_ids]
    test = [r for r in records if r.record.id not in train_ids]
    return train, test


def with_split(paragraph: AnnotatedParagraph, split: Split) -> AnnotatedParagraph:
    """Copy of the paragraph with its record's split field set."""
    return AnnotatedParagraph(
        record=replace(paragraph.record, split=split),
        edits=paragraph.edits,
        scores=paragraph.scores,
    )
