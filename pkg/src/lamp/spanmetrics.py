"""Span-level General and Categorical precision, plus multi-annotator
agreement computed as the mean of ordered-pair precisions.

Overlap is counted on character ranges. General precision credits any
character of a predicted span that falls inside some gold span; Categorical
additionally requires the categories to coincide. Both divide by the total
predicted characters, so over-prediction is penalized.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .corpus import EditCategory


class SpanMetricsError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledSpan:
    start: int
    end: int
    category: EditCategory

    def __post_init__(self) -> None:
        if not (0 <= self.start < self.end):
            raise SpanMetricsError(f"invalid span [{self.start},{self.end})")

    def __len__(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class PrecisionResult:
    general: float
    categorical: float
    predicted_chars: int
    overlap_chars: int
    category_matched_chars: int


def _validate_side(name: str, spans: Sequence[LabeledSpan], text_length: int) -> None:
    for s in spans:
        if s.end > text_length:
            raise SpanMetricsError(
                f"{name} span [{s.start},{s.end}) exceeds text length {text_length}"
            )
    ordered = sorted(spans, key=lambda s: s.start)
    for a, b in zip(ordered, ordered[1:]):
        if b.start < a.end:
            raise SpanMetricsError(
                f"{name} spans overlap: [{a.start},{a.end}) and [{b.start},{b.end})"
            )


def _overlap(a: LabeledSpan, b: LabeledSpan) -> int:
    return max(0, min(a.end, b.end) - max(a.start, b.start))


def precision(
    predicted: Sequence[LabeledSpan],
    gold: Sequence[LabeledSpan],
    text_length: int,
) -> PrecisionResult:
    """Character-overlap precision of predicted spans against gold spans.

    An empty prediction set is vacuously precise (1.0 for both variants);
    callers can detect the case through predicted_chars == 0.
    """
    _validate_side("predicted", predicted, text_length)
    _validate_side("gold", gold, text_length)
    predicted_chars = sum(len(p) for p in predicted)
    if predicted_chars == 0:
        return PrecisionResult(1.0, 1.0, 0, 0, 0)
    overlap_chars = 0
    matched_chars = 0
    for p in predicted:
        for g in gold:
            shared = _overlap(p, g)
            overlap_chars += shared
            if p.category == g.category:
                matched_chars += shared
    return PrecisionResult(
        general=overlap_chars / predicted_chars,
        categorical=matched_chars / predicted_chars,
        predicted_chars=predicted_chars,
        overlap_chars=overlap_chars,
        category_matched_chars=matched_chars,
    )


def pairwise_agreement(
    annotations: dict[str, Sequence[LabeledSpan]],
    text_length: int,
    categorical: bool = False,
) -> float:
    """Mean precision over all ordered annotator pairs.

    Each annotator's spans serve as the prediction against each other
    annotator's spans as gold; precision is asymmetric, so both directions
    contribute.
    """
    names = sorted(annotations)
    if len(names) < 2:
        raise SpanMetricsError("agreement needs at least 2 annotators")
    values = []
    for a in names:
        for b in names:
            if a == b:
                continue
            result = precision(annotations[a], annotations[b], text_length)
            values.append(result.categorical if categorical else result.general)
    return sum(values) / len(values)
