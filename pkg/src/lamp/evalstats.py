"""Preference-evaluation statistics: Kendall's W, Wilcoxon signed-rank,
average ranks over 3-way preference judgments, and Pearson correlation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

CONDITIONS = ("LLMGenerated", "WriterEdited", "LLMEditedOracle", "LLMEditedFull")


class EvalStatsError(ValueError):
    pass


@dataclass(frozen=True)
class PreferenceJudgment:
    """One judge's ranking of a shuffled three-variant triplet.

    condition_of_rank maps rank 1..3 to the condition name; display_order
    records the anonymized on-screen ordering so the shuffle stays auditable.
    """

    triplet_id: str
    judge: str
    condition_of_rank: dict[int, str]
    display_order: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if sorted(self.condition_of_rank) != [1, 2, 3]:
            raise EvalStatsError(
                f"triplet {self.triplet_id!r}: ranks must be exactly {{1,2,3}}"
            )
        conditions = set(self.condition_of_rank.values())
        if len(conditions) != 3:
            raise EvalStatsError(f"triplet {self.triplet_id!r}: conditions must be distinct")
        unknown = conditions - set(CONDITIONS)
        if unknown:
            raise EvalStatsError(f"unknown conditions {sorted(unknown)}")
        if not {"LLMGenerated", "WriterEdited"} <= conditions:
            raise EvalStatsError(
                f"triplet {self.triplet_id!r}: LLMGenerated and WriterEdited "
                "must both be present"
            )

    @property
    def rank_of_condition(self) -> dict[str, int]:
        return {cond: rank for rank, cond in self.condition_of_rank.items()}

    def to_json(self) -> dict:
        return {
            "triplet_id": self.triplet_id,
            "judge": self.judge,
            "ranks": {str(r): c for r, c in sorted(self.condition_of_rank.items())},
            "display_order": list(self.display_order),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PreferenceJudgment":
        return cls(
            triplet_id=obj["triplet_id"],
            judge=obj["judge"],
            condition_of_rank={int(r): c for r, c in obj["ranks"].items()},
            display_order=tuple(obj.get("display_order", ())),
        )


def load_judgments(path: str | Path) -> list[PreferenceJudgment]:
    judgments = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                judgments.append(PreferenceJudgment.from_json(json.loads(line)))
            except (KeyError, ValueError, TypeError) as exc:
                raise EvalStatsError(f"{path}: line {lineno}: {exc}") from exc
    return judgments


def kendalls_w(rankings: Sequence[Sequence[int]]) -> float:
    """Kendall's coefficient of concordance for m judges ranking n items.

    W = 12*S / (m^2 * (n^3 - n)) with S the sum of squared deviations of the
    item rank-sums from their mean. Rows must be permutations of 1..n (the
    no-ties form).
    """
    m = len(rankings)
    if m < 2:
        raise EvalStatsError("need at least 2 judges")
    n = len(rankings[0])
    if n < 2:
        raise EvalStatsError("need at least 2 items")
    for row in rankings:
        if sorted(row) != list(range(1, n + 1)):
            raise EvalStatsError(f"row {list(row)} is not a permutation of 1..{n}")
    rank_sums = [sum(row[j] for row in rankings) for j in range(n)]
    mean = sum(rank_sums) / n
    s = sum((r - mean) ** 2 for r in rank_sums)
    return 12.0 * s / (m * m * (n**3 - n))


@dataclass
class AgreementReport:
    per_triplet_w: list[tuple[str, float]]
    mean_w: float
    n_judgments: int
    # mean of per-triplet W; a pooled variant is one flag away in callers
    aggregation: str = "mean-per-triplet"

    def to_json(self) -> dict:
        return {
            "mean_w": self.mean_w,
            "n_judgments": self.n_judgments,
            "aggregation": self.aggregation,
            "per_triplet_w": [{"triplet_id": t, "w": w} for t, w in self.per_triplet_w],
        }


def mean_agreement(judgments: Iterable[PreferenceJudgment]) -> AgreementReport:
    """Per-triplet Kendall's W, averaged over triplets."""
    by_triplet: dict[str, list[PreferenceJudgment]] = {}
    for j in judgments:
        by_triplet.setdefault(j.triplet_id, []).append(j)
    if not by_triplet:
        raise EvalStatsError("no judgments")
    counts = {len(js) for js in by_triplet.values()}
    if len(counts) != 1:
        raise EvalStatsError(f"unequal judge counts per triplet: {sorted(counts)}")
    if counts.pop() < 2:
        raise EvalStatsError("triplets need at least 2 judges for agreement")
    per_triplet: list[tuple[str, float]] = []
    n_judgments = 0
    for triplet_id in sorted(by_triplet):
        js = by_triplet[triplet_id]
        conditions = sorted(js[0].rank_of_condition)
        if any(sorted(j.rank_of_condition) != conditions for j in js):
            raise EvalStatsError(f"triplet {triplet_id!r}: judges saw different conditions")
        matrix = [[j.rank_of_condition[c] for c in conditions] for j in js]
        per_triplet.append((triplet_id, kendalls_w(matrix)))
        n_judgments += len(js)
    mean_w = sum(w for _, w in per_triplet) / len(per_triplet)
    return AgreementReport(per_triplet_w=per_triplet, mean_w=mean_w, n_judgments=n_judgments)


def average_ranks(judgments: Iterable[PreferenceJudgment]) -> dict[str, float]:
    """Mean rank per condition over the judgments that include it."""
    totals: dict[str, int] = {}
    counts: dict[str, int] = {}
    n = 0
    for j in judgments:
        n += 1
        for cond, rank in j.rank_of_condition.items():
            totals[cond] = totals.get(cond, 0) + rank
            counts[cond] = counts.get(cond, 0) + 1
    if n == 0:
        raise EvalStatsError("no judgments")
    return {cond: totals[cond] / counts[cond] for cond in sorted(totals)}


@dataclass
class WilcoxonResult:
    statistic: float
    p_value: float
    n: int
    method: str
    degenerate: bool = False


def _average_ranks_of(values: Sequence[float]) -> list[float]:
    """Ranks 1..n with tied values receiving the average of their positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def wilcoxon_signed_rank(pairs: Sequence[tuple[float, float]]) -> WilcoxonResult:
    """Two-sided Wilcoxon signed-rank test on paired samples.

    Zero differences are discarded; tied absolute differences get average
    ranks. Up to n=25 the p-value is exact over the full sign-assignment
    distribution; above that a normal approximation with continuity
    correction (and tie-corrected variance) is used. The statistic is
    min(W+, W-).
    """
    if not pairs:
        raise EvalStatsError("need at least one pair")
    diffs = [a - b for a, b in pairs if a != b]
    n = len(diffs)
    if n == 0:
        return WilcoxonResult(statistic=0.0, p_value=1.0, n=0, method="exact", degenerate=True)
    ranks = _average_ranks_of([abs(d) for d in diffs])
    w_plus = sum(r for d, r in zip(diffs, ranks) if d > 0)
    w_minus = sum(r for d, r in zip(diffs, ranks) if d < 0)
    statistic = float(min(w_plus, w_minus))

    if n <= 25:
        # Exact null distribution of 2*W+ (doubled so average ranks stay
        # integral), built by dynamic programming over sign assignments.
        doubled = [round(2 * r) for r in ranks]
        total = sum(doubled)
        counts = [0] * (total + 1)
        counts[0] = 1
        for r in doubled:
            for s in range(total, r - 1, -1):
                counts[s] += counts[s - r]
        lo = round(2 * statistic)
        n_le = sum(counts[: lo + 1])
        n_ge = sum(counts[total - lo :])
        p = min(1.0, (n_le + n_ge) / (1 << n))
        return WilcoxonResult(statistic=statistic, p_value=p, n=n, method="exact")

    mu = n * (n + 1) / 4
    tie_sizes: dict[float, int] = {}
    for r in ranks:
        tie_sizes[r] = tie_sizes.get(r, 0) + 1
    tie_term = sum(t**3 - t for t in tie_sizes.values())
    sigma = math.sqrt(n * (n + 1) * (2 * n + 1) / 24 - tie_term / 48)
    z = (statistic - mu + 0.5) / sigma
    p = min(1.0, math.erfc(-z / math.sqrt(2)))
    return WilcoxonResult(statistic=statistic, p_value=p, n=n, method="normal")


def pearson_r(x: Sequence[float], y: Sequence[float]) -> float:
    """Product-moment correlation; requires length >= 2 and non-zero variance."""
    if len(x) != len(y):
        raise EvalStatsError("length mismatch")
    n = len(x)
    if n < 2:
        raise EvalStatsError("need at least 2 points")
    mx = sum(x) / n
    my = sum(y) / n
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    if sxx == 0 or syy == 0:
        raise EvalStatsError("zero variance")
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    return sxy / math.sqrt(sxx * syy)
