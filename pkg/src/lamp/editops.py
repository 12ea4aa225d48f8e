"""Deterministic edit analytics: operation classification, edit application,
Levenshtein distance, meaning-preservation, score normalization, corpus stats.

All character counting is in Unicode scalar values (plain Python string
lengths and indices).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Protocol, Sequence

from . import evalstats
from .corpus import AnnotatedParagraph, EditSpan

# Net length change (in scalar values) beyond which an edit counts as a pure
# insertion/deletion rather than a replacement; roughly ten words.
NET_CHAR_THRESHOLD = 40

# Similarity above this counts as meaning-preserving (strict >).
DEFAULT_MEANING_THRESHOLD = 0.6


class EditOpsError(ValueError):
    pass


class EditOperation(str, Enum):
    INSERTION = "Insertion"
    DELETION = "Deletion"
    REPLACEMENT = "Replacement"


class MeaningClass(str, Enum):
    MEANING_PRESERVING = "MeaningPreserving"
    MEANING_CHANGING = "MeaningChanging"


def classify_edit_operation(edit: EditSpan) -> EditOperation:
    """Classify one edit as insertion, deletion, or replacement.

    Insertion: deletes no characters, or adds NET_CHAR_THRESHOLD+ net.
    Deletion: adds no characters, or removes NET_CHAR_THRESHOLD+ net.
    Everything else is a replacement. Exactly one branch fires for any
    valid edit.
    """
    n_orig = len(edit.original)
    n_repl = len(edit.replacement)
    if n_orig == 0 and n_repl == 0:
        raise EditOpsError("invalid edit: original and replacement both empty")
    net = n_repl - n_orig
    if n_orig == 0 or net >= NET_CHAR_THRESHOLD:
        return EditOperation.INSERTION
    if n_repl == 0 or net <= -NET_CHAR_THRESHOLD:
        return EditOperation.DELETION
    return EditOperation.REPLACEMENT


def apply_edits(paragraph: str, edits: Iterable[EditSpan]) -> str:
    """Splice every live (non-undone) edit into the paragraph.

    Live edits must be mutually non-overlapping against the original
    paragraph; splicing runs in descending start order so earlier offsets
    stay valid.
    """
    live = [e for e in edits if not e.undone]
    for e in live:
        if e.end > len(paragraph):
            raise EditOpsError(
                f"edit [{e.start},{e.end}) out of range for paragraph of "
                f"length {len(paragraph)}"
            )
    by_start = sorted(live, key=lambda e: e.start)
    for a, b in zip(by_start, by_start[1:]):
        if b.start < a.end:
            raise EditOpsError(
                f"overlapping edits: [{a.start},{a.end}) and [{b.start},{b.end})"
            )
    text = paragraph
    for e in sorted(live, key=lambda e: e.start, reverse=True):
        text = text[: e.start] + e.replacement + text[e.end :]
    return text


def levenshtein(a: str, b: str) -> int:
    """Unit-cost character Levenshtein distance over Unicode scalar values."""
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            current.append(
                min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost)
            )
        previous = current
    return previous[-1]


def classify_meaning(
    similarity: float, threshold: float = DEFAULT_MEANING_THRESHOLD
) -> MeaningClass:
    """Meaning-preserving iff similarity strictly exceeds the threshold."""
    if not (0.0 <= similarity <= 1.0):
        raise EditOpsError(f"similarity {similarity} outside [0,1]")
    if similarity > threshold:
        return MeaningClass.MEANING_PRESERVING
    return MeaningClass.MEANING_CHANGING


class SimilarityScorer(Protocol):
    """Interface for original-vs-replacement semantic similarity in [0,1]."""

    name: str

    def score(self, a: str, b: str) -> float: ...


class TrigramCosineScorer:
    """Character-trigram cosine similarity.

    A deterministic stand-in for a neural similarity model: good enough for
    plumbing and tests, not a substitute for learned semantics. Strings
    shorter than 3 characters have no trigrams and score 0 unless equal.
    """

    name = "trigram-cosine"

    @staticmethod
    def _trigrams(text: str) -> Counter:
        return Counter(text[i : i + 3] for i in range(len(text) - 2))

    def score(self, a: str, b: str) -> float:
        if a == b:
            return 1.0
        ta, tb = self._trigrams(a), self._trigrams(b)
        if not ta or not tb:
            return 0.0
        dot = sum(count * tb[gram] for gram, count in ta.items())
        norm_a = sum(c * c for c in ta.values()) ** 0.5
        norm_b = sum(c * c for c in tb.values()) ** 0.5
        return dot / (norm_a * norm_b)


def score_similarity(scorer: SimilarityScorer, a: str, b: str) -> float:
    """Run the configured scorer, clamping rounding noise into [0,1]."""
    try:
        value = scorer.score(a, b)
    except Exception as exc:
        raise EditOpsError(f"similarity scorer {scorer.name!r} failed: {exc}") from exc
    if not (-1e-9 <= value <= 1.0 + 1e-9):
        raise EditOpsError(f"scorer {scorer.name!r} returned {value} outside [0,1]")
    return min(1.0, max(0.0, value))


def normalize_scores(
    scores_by_annotator: dict[str, Sequence[int]]
) -> dict[str, list[float]]:
    """Per-annotator z-score then min-max rescale onto [1,10].

    z uses the population standard deviation. A degenerate annotator (zero
    std, including a single score) maps every value to the 5.5 midpoint.
    """
    out: dict[str, list[float]] = {}
    for annotator, scores in scores_by_annotator.items():
        if not scores:
            raise EditOpsError(f"annotator {annotator!r} has no scores")
        n = len(scores)
        mean = sum(scores) / n
        var = sum((s - mean) ** 2 for s in scores) / n
        if var == 0.0:
            out[annotator] = [5.5] * n
            continue
        std = var**0.5
        zs = [(s - mean) / std for s in scores]
        zmin, zmax = min(zs), max(zs)
        out[annotator] = [1.0 + 9.0 * (z - zmin) / (zmax - zmin) for z in zs]
    return out


@dataclass
class ParagraphDistance:
    id: str
    n_edits: int
    distance: int
    iwqs: int | None
    iwqs_norm: float | None


@dataclass
class CorpusStats:
    """Corpus-level edit analytics, ready for CSV/JSON reporting."""

    op_distribution: dict[str, float]
    category_distribution: dict[str, float]
    mean_edits_per_paragraph: float
    edit_distance_per_paragraph: list[ParagraphDistance]
    pearson_r_distance_iwqs: float | None
    meaning_histogram: list[int]
    meaning_bin_edges: list[float]
    meaning_preserving_fraction: float | None
    scorer_name: str
    meaning_threshold: float

    def to_json(self) -> dict:
        return {
            "op_distribution": self.op_distribution,
            "category_distribution": self.category_distribution,
            "mean_edits_per_paragraph": self.mean_edits_per_paragraph,
            "pearson_r_distance_iwqs": self.pearson_r_distance_iwqs,
            "meaning_histogram": self.meaning_histogram,
            "meaning_bin_edges": self.meaning_bin_edges,
            "meaning_preserving_fraction": self.meaning_preserving_fraction,
            "scorer": self.scorer_name,
            "meaning_threshold": self.meaning_threshold,
            "paragraphs": [
                {
                    "id": p.id,
                    "n_edits": p.n_edits,
                    "edit_distance": p.distance,
                    "iwqs_raw": p.iwqs,
                    "iwqs_norm": p.iwqs_norm,
                }
                for p in self.edit_distance_per_paragraph
            ],
        }


def _category_key(edit: EditSpan) -> str:
    if edit.category.is_other:
        return f"Other:{edit.category.other_name}"
    return edit.category.name


def corpus_stats(
    records: Sequence[AnnotatedParagraph],
    scorer: SimilarityScorer | None = None,
    meaning_threshold: float = DEFAULT_MEANING_THRESHOLD,
    n_bins: int = 20,
) -> CorpusStats:
    """Compute the standard analytics over a corpus.

    Edit distance is measured between each original response and the result
    of applying its live edits; the distance/IWQS correlation uses
    per-annotator normalized IWQS. With fewer than two scored paragraphs (or
    zero variance) the correlation is reported as absent.
    """
    if not records:
        raise EditOpsError("empty corpus")
    scorer = scorer or TrigramCosineScorer()

    op_counts: Counter = Counter()
    cat_counts: Counter = Counter()
    similarities: list[float] = []
    for para in records:
        for edit in para.live_edits:
            op = classify_edit_operation(edit)
            op_counts[op.value] += 1
            cat_counts[_category_key(edit)] += 1
            if op is not EditOperation.DELETION:
                similarities.append(score_similarity(scorer, edit.original, edit.replacement))

    total_edits = sum(op_counts.values())
    op_distribution: dict[str, float] = {}
    category_distribution: dict[str, float] = {}
    if total_edits:
        op_distribution = {op: count / total_edits for op, count in sorted(op_counts.items())}
        category_distribution = {
            cat: count / total_edits for cat, count in sorted(cat_counts.items())
        }

    # Normalize IWQS per annotator, then map scores back to paragraphs.
    scored = [(p.record.id, p.scores) for p in records if p.scores is not None]
    by_annotator: dict[str, list[int]] = {}
    for _, scores in scored:
        by_annotator.setdefault(scores.annotator, []).append(scores.iwqs)
    normalized = normalize_scores(by_annotator) if by_annotator else {}
    cursor = {annotator: 0 for annotator in normalized}
    norm_for_record: dict[str, float] = {}
    for rid, scores in scored:
        idx = cursor[scores.annotator]
        norm_for_record[rid] = normalized[scores.annotator][idx]
        cursor[scores.annotator] = idx + 1

    per_paragraph: list[ParagraphDistance] = []
    for para in records:
        distance = levenshtein(para.record.response, apply_edits(para.record.response, para.edits))
        per_paragraph.append(
            ParagraphDistance(
                id=para.record.id,
                n_edits=len(para.live_edits),
                distance=distance,
                iwqs=para.scores.iwqs if para.scores else None,
                iwqs_norm=norm_for_record.get(para.record.id),
            )
        )

    xs = [p.distance for p in per_paragraph if p.iwqs_norm is not None]
    ys = [p.iwqs_norm for p in per_paragraph if p.iwqs_norm is not None]
    pearson: float | None
    try:
        pearson = evalstats.pearson_r(xs, ys) if len(xs) >= 2 else None
    except evalstats.EvalStatsError:
        pearson = None

    edges = [i / n_bins for i in range(n_bins + 1)]
    histogram = [0] * n_bins
    for s in similarities:
        idx = min(int(s * n_bins), n_bins - 1)
        histogram[idx] += 1
    preserving = None
    if similarities:
        preserving = sum(
            1 for s in similarities if s > meaning_threshold
        ) / len(similarities)

    return CorpusStats(
        op_distribution=op_distribution,
        category_distribution=category_distribution,
        mean_edits_per_paragraph=total_edits / len(records),
        edit_distance_per_paragraph=per_paragraph,
        pearson_r_distance_iwqs=pearson,
        meaning_histogram=histogram,
        meaning_bin_edges=edges,
        meaning_preserving_fraction=preserving,
        scorer_name=scorer.name,
        meaning_threshold=meaning_threshold,
    )
