from __future__ import annotations

import itertools
import math
import random

import pytest

from lamp.evalstats import (
    EvalStatsError,
    PreferenceJudgment,
    average_ranks,
    kendalls_w,
    load_judgments,
    mean_agreement,
    pearson_r,
    wilcoxon_signed_rank,
)


def judgment(tid, judge, g, w, f=None, o=None):
    ranks = {g: "LLMGenerated", w: "WriterEdited"}
    if f is not None:
        ranks[f] = "LLMEditedFull"
    if o is not None:
        ranks[o] = "LLMEditedOracle"
    return PreferenceJudgment(triplet_id=tid, judge=judge, condition_of_rank=ranks)


# -- kendalls_w ---------------------------------------------------------------


def test_w_identical_rankings():
    assert kendalls_w([(1, 2, 3)] * 3) == 1.0


def test_w_cyclic_rotations():
    assert kendalls_w([(1, 2, 3), (2, 3, 1), (3, 1, 2)]) == 0.0


def test_w_hand_computed_example():
    # rank sums 5,6,7 -> S=2 -> W = 24/216
    assert kendalls_w([(1, 2, 3), (1, 2, 3), (3, 2, 1)]) == pytest.approx(24 / 216, abs=1e-15)


def test_w_rejects_non_permutation():
    with pytest.raises(EvalStatsError):
        kendalls_w([(1, 1, 3), (1, 2, 3)])
    with pytest.raises(EvalStatsError):
        kendalls_w([(1, 2, 3)])


def spearman_rho(a, b):
    n = len(a)
    d2 = sum((x - y) ** 2 for x, y in zip(a, b))
    return 1 - 6 * d2 / (n * (n * n - 1))


def test_w_exhaustive_3x3_against_spearman_identity():
    # W relates to the mean pairwise Spearman over ordered pairs:
    # W = ((m-1)*rho_mean + 1) / m, an independent computation route.
    perms = list(itertools.permutations((1, 2, 3)))
    m = 3
    for rows in itertools.product(perms, repeat=3):
        rhos = [
            spearman_rho(rows[i], rows[j])
            for i in range(m)
            for j in range(m)
            if i < j
        ]
        rho_mean = sum(rhos) / len(rhos)
        oracle = ((m - 1) * rho_mean + 1) / m
        assert abs(kendalls_w(rows) - oracle) < 1e-12, rows


def test_w_invariant_under_relabeling():
    rows = [(1, 3, 2), (2, 1, 3), (1, 2, 3)]
    base = kendalls_w(rows)
    # permute item columns
    for perm in itertools.permutations(range(3)):
        permuted = [tuple(row[i] for i in perm) for row in rows]
        assert kendalls_w(permuted) == pytest.approx(base, abs=1e-12)
    # permute judges
    assert kendalls_w(rows[::-1]) == pytest.approx(base, abs=1e-12)


# -- mean_agreement ------------------------------------------------------------


def test_mean_agreement_unanimous():
    judgments = [judgment(f"t{i}", f"j{k}", g=3, w=1, f=2) for i in range(4) for k in range(3)]
    report = mean_agreement(judgments)
    assert report.mean_w == 1.0
    assert report.n_judgments == 12


def test_mean_agreement_half_discordant():
    judgments = []
    for i in range(2):  # unanimous triplets
        judgments += [judgment(f"u{i}", f"j{k}", g=3, w=1, f=2) for k in range(3)]
    for i in range(2):  # fully discordant: cyclic rotations, W=0
        judgments += [
            judgment(f"d{i}", "j0", g=1, w=2, f=3),
            judgment(f"d{i}", "j1", g=2, w=3, f=1),
            judgment(f"d{i}", "j2", g=3, w=1, f=2),
        ]
    assert mean_agreement(judgments).mean_w == pytest.approx(0.5)


def test_mean_agreement_four_triplet_hand_average():
    judgments = []
    # t1, t4 unanimous -> W=1 each
    for tid in ("t1", "t4"):
        judgments += [judgment(tid, f"j{k}", g=3, w=1, f=2) for k in range(3)]
    # t2 cyclic -> W=0
    judgments += [
        judgment("t2", "j0", g=1, w=2, f=3),
        judgment("t2", "j1", g=2, w=3, f=1),
        judgment("t2", "j2", g=3, w=1, f=2),
    ]
    # t3: over sorted conditions [Full, Generated, Writer] the rank rows are
    # (1,2,3), (1,2,3), (3,2,1) -> W = 24/216
    judgments += [
        judgment("t3", "j0", f=1, g=2, w=3),
        judgment("t3", "j1", f=1, g=2, w=3),
        judgment("t3", "j2", f=3, g=2, w=1),
    ]
    expected = (1.0 + 0.0 + 24 / 216 + 1.0) / 4
    assert mean_agreement(judgments).mean_w == pytest.approx(expected, abs=1e-12)


def test_mean_agreement_rejects_single_judge():
    with pytest.raises(EvalStatsError):
        mean_agreement([judgment("t1", "j0", g=3, w=1, f=2)])


# -- average_ranks ----------------------------------------------------------------


def test_average_ranks_single_judgment():
    ranks = average_ranks([judgment("t1", "j1", w=1, f=2, g=3)])
    assert ranks == {"LLMEditedFull": 2.0, "LLMGenerated": 3.0, "WriterEdited": 1.0}


def test_average_ranks_absent_condition_absent_from_output():
    ranks = average_ranks([judgment("t1", "j1", w=1, o=2, g=3)])
    assert "LLMEditedFull" not in ranks
    assert ranks["LLMEditedOracle"] == 2.0


def make_table10_fixture():
    """600 judgments whose rank multisets reproduce the published mean ranks
    within +/-0.005: means (2.545, 1.465, 1.99) for G, W, F."""
    patterns = (
        [("WriterEdited", 1), ("LLMEditedFull", 2), ("LLMGenerated", 3)] * 138
        + [("WriterEdited", 1), ("LLMGenerated", 2), ("LLMEditedFull", 3)] * 213
        + [("LLMEditedFull", 1), ("WriterEdited", 2), ("LLMGenerated", 3)] * 219
        + [("LLMGenerated", 1), ("LLMEditedFull", 2), ("WriterEdited", 3)] * 30
    )
    judgments = []
    for i in range(600):
        triple = patterns[i * 3 : i * 3 + 3]
        judgments.append(
            PreferenceJudgment(
                triplet_id=f"t{i:04d}",
                judge="j1",
                condition_of_rank={rank: cond for cond, rank in triple},
            )
        )
    return judgments


def test_average_ranks_table10_shaped_fixture():
    ranks = average_ranks(make_table10_fixture())
    assert ranks["LLMGenerated"] == pytest.approx(2.55, abs=0.005)
    assert ranks["WriterEdited"] == pytest.approx(1.47, abs=0.005)
    assert ranks["LLMEditedFull"] == pytest.approx(1.99, abs=0.005)


def test_average_ranks_weighted_mean_is_two():
    judgments = make_table10_fixture()
    total = sum(rank for j in judgments for rank in j.rank_of_condition.values())
    assert total / (3 * len(judgments)) == 2.0


def test_judgment_validation():
    with pytest.raises(EvalStatsError):
        PreferenceJudgment("t", "j", {1: "LLMGenerated", 2: "LLMGenerated", 3: "WriterEdited"})
    with pytest.raises(EvalStatsError):
        PreferenceJudgment("t", "j", {1: "LLMEditedFull", 2: "LLMEditedOracle", 3: "WriterEdited"})
    with pytest.raises(EvalStatsError):
        PreferenceJudgment("t", "j", {1: "WriterEdited", 2: "LLMGenerated"})


def test_judgment_round_trip(tmp_path):
    judgments = [judgment("t1", "j1", w=1, f=2, g=3), judgment("t2", "j2", w=2, o=1, g=3)]
    path = tmp_path / "judgments.jsonl"
    with open(path, "w") as f:
        for j in judgments:
            f.write(__import__("json").dumps(j.to_json()) + "\n")
    assert load_judgments(path) == judgments


# -- wilcoxon ---------------------------------------------------------------------


def wilcoxon_enumeration_oracle(diffs):
    """Literal 2^n enumeration over sign assignments (doubled ranks for
    exact tie handling)."""
    n = len(diffs)
    values = [abs(d) for d in diffs]
    order = sorted(range(n), key=lambda i: values[i])
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and values[order[j + 1]] == values[order[i]]:
            j += 1
        for k in range(i, j + 1):
            ranks[order[k]] = (i + j) / 2 + 1
        i = j + 1
    doubled = [round(2 * r) for r in ranks]
    total = sum(doubled)
    w_plus = sum(r for d, r in zip(diffs, doubled) if d > 0)
    w_minus = sum(r for d, r in zip(diffs, doubled) if d < 0)
    lo = min(w_plus, w_minus)
    count_le = count_ge = 0
    for signs in itertools.product((0, 1), repeat=n):
        w = sum(r for s, r in zip(signs, doubled) if s)
        if w <= lo:
            count_le += 1
        if w >= total - lo:
            count_ge += 1
    return min(1.0, (count_le + count_ge) / 2**n)


def test_wilcoxon_degenerate_identical_pairs():
    result = wilcoxon_signed_rank([(1.0, 1.0), (2.5, 2.5)])
    assert result.degenerate
    assert result.p_value == 1.0


def test_wilcoxon_five_distinct_positive():
    result = wilcoxon_signed_rank([(5, 1), (6, 2), (9, 3), (14, 4), (25, 5)])
    assert result.method == "exact"
    assert result.p_value == 2 / 32
    assert result.statistic == 0.0


def test_wilcoxon_all_positive_closed_form():
    for n in range(1, 11):
        pairs = [(float(i + 10 + i * i), float(i)) for i in range(n)]
        result = wilcoxon_signed_rank(pairs)
        assert result.p_value == 2 / 2**n, n


def test_wilcoxon_exact_matches_enumeration_n8():
    rng = random.Random(7)
    for _ in range(25):
        diffs = [rng.randint(-6, 6) for _ in range(8)]
        if all(d == 0 for d in diffs):
            continue
        pairs = [(float(d), 0.0) for d in diffs if d != 0]
        result = wilcoxon_signed_rank(pairs)
        oracle = wilcoxon_enumeration_oracle([d for d in diffs if d != 0])
        assert result.p_value == pytest.approx(oracle, abs=1e-12)


def test_wilcoxon_exact_matches_enumeration_all_n_le_10():
    rng = random.Random(13)
    for n in range(1, 11):
        for _ in range(8):
            diffs = [rng.choice([-5, -3, -2, -1, 1, 2, 3, 5]) for _ in range(n)]
            pairs = [(float(d), 0.0) for d in diffs]
            result = wilcoxon_signed_rank(pairs)
            assert result.method == "exact"
            oracle = wilcoxon_enumeration_oracle(diffs)
            assert result.p_value == pytest.approx(oracle, abs=1e-12), (n, diffs)


def test_wilcoxon_normal_branch_large_n():
    rng = random.Random(3)
    pairs = [(rng.random() + 0.3, rng.random()) for _ in range(40)]
    result = wilcoxon_signed_rank(pairs)
    assert result.method == "normal"
    assert 0.0 < result.p_value <= 1.0


def test_wilcoxon_empty_error():
    with pytest.raises(EvalStatsError):
        wilcoxon_signed_rank([])


# -- pearson -----------------------------------------------------------------------


def test_pearson_perfect_lines():
    x = [1.0, 2.0, 3.0, 4.0]
    assert pearson_r(x, [2 * v + 1 for v in x]) == pytest.approx(1.0)
    assert pearson_r(x, [-v for v in x]) == pytest.approx(-1.0)


def test_pearson_six_point_hand_computed():
    x = [1, 2, 3, 4, 5, 6]
    y = [1, 3, 2, 5, 4, 6]
    # sxy=15.5, sxx=syy=17.5 -> r = 31/35
    assert pearson_r(x, y) == pytest.approx(31 / 35, abs=1e-12)


def test_pearson_affine_invariance():
    x = [1.0, 4.0, 2.0, 8.0, 5.0]
    y = [2.0, 3.0, 9.0, 1.0, 4.0]
    base = pearson_r(x, y)
    assert pearson_r([3 * v + 7 for v in x], y) == pytest.approx(base, abs=1e-12)
    assert pearson_r(x, [-2 * v + 1 for v in y]) == pytest.approx(-base, abs=1e-12)


def test_pearson_errors():
    with pytest.raises(EvalStatsError):
        pearson_r([1.0], [2.0])
    with pytest.raises(EvalStatsError):
        pearson_r([1.0, 1.0], [2.0, 3.0])
    with pytest.raises(EvalStatsError):
        pearson_r([1.0, 2.0], [2.0])
