"""Report writers: delimited tables (CSV/JSON) plus matplotlib figures
rendered to files next to them.

Every report function takes an output directory and returns the list of
paths it wrote, so the CLI can print them in its summary line.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .editops import CorpusStats
from .idiom import TemplateReport


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def _bar(path: Path, labels: list[str], values: list[float], title: str, ylabel: str) -> None:
    fig, ax = plt.subplots(figsize=(max(4.0, 0.9 * len(labels) + 1.5), 3.2))
    ax.bar(range(len(labels)), values, color="#4878a8")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_stats_report(stats: CorpusStats, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []

    csv_path = out / "stats_paragraphs.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["id", "n_edits", "edit_distance", "iwqs_raw", "iwqs_norm"])
        for p in stats.edit_distance_per_paragraph:
            writer.writerow(
                [p.id, p.n_edits, p.distance,
                 "" if p.iwqs is None else p.iwqs,
                 "" if p.iwqs_norm is None else f"{p.iwqs_norm:.6f}"]
            )
    paths.append(csv_path)

    json_path = out / "stats.json"
    _write_json(json_path, stats.to_json())
    paths.append(json_path)

    if stats.op_distribution:
        fig_path = out / "op_distribution.png"
        labels = list(stats.op_distribution)
        _bar(fig_path, labels, [stats.op_distribution[k] for k in labels],
             "Edit operations", "proportion")
        paths.append(fig_path)
    if stats.category_distribution:
        fig_path = out / "category_distribution.png"
        labels = list(stats.category_distribution)
        _bar(fig_path, labels, [stats.category_distribution[k] for k in labels],
             "Edit categories", "proportion")
        paths.append(fig_path)

    fig_path = out / "similarity_histogram.png"
    fig, ax = plt.subplots(figsize=(5, 3.2))
    centers = [
        (a + b) / 2
        for a, b in zip(stats.meaning_bin_edges, stats.meaning_bin_edges[1:])
    ]
    width = stats.meaning_bin_edges[1] - stats.meaning_bin_edges[0]
    ax.bar(centers, stats.meaning_histogram, width=width * 0.9, color="#4878a8")
    ax.axvline(stats.meaning_threshold, color="#b0413e", linestyle="--",
               label=f"threshold {stats.meaning_threshold}")
    ax.set_xlabel(f"similarity ({stats.scorer_name})")
    ax.set_ylabel("edits")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(fig_path, dpi=120)
    plt.close(fig)
    paths.append(fig_path)

    scored = [p for p in stats.edit_distance_per_paragraph if p.iwqs_norm is not None]
    if scored:
        fig_path = out / "distance_vs_iwqs.png"
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.scatter([p.iwqs_norm for p in scored], [p.distance for p in scored],
                   s=12, alpha=0.7, color="#4878a8")
        r = stats.pearson_r_distance_iwqs
        ax.set_xlabel("normalized IWQS")
        ax.set_ylabel("edit distance")
        ax.set_title("editing amount vs initial quality" + (f" (r={r:.2f})" if r is not None else ""))
        fig.tight_layout()
        fig.savefig(fig_path, dpi=120)
        plt.close(fig)
        paths.append(fig_path)
    return paths


def write_precision_report(
    rows: list[dict], mean_general: float, mean_categorical: float, out_dir: str | Path
) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "precision.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["id", "general", "categorical", "predicted_chars", "overlap_chars"])
        for row in rows:
            writer.writerow([row["id"], f"{row['general']:.6f}", f"{row['categorical']:.6f}",
                             row["predicted_chars"], row["overlap_chars"]])
        writer.writerow(["__mean__", f"{mean_general:.6f}", f"{mean_categorical:.6f}", "", ""])
    fig_path = out / "precision.png"
    _bar(fig_path, ["general", "categorical"], [mean_general, mean_categorical],
         "span precision (corpus mean)", "precision")
    return [csv_path, fig_path]


def write_agreement_report(rows: list[dict], out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "agreement.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["id", "general_agreement", "categorical_agreement", "n_annotators"])
        for row in rows:
            writer.writerow([row["id"], f"{row['general']:.6f}",
                             f"{row['categorical']:.6f}", row["n_annotators"]])
    return [csv_path]


def write_template_report(reports: list[TemplateReport], out_dir: str | Path,
                          metadata: dict) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "templates.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["template", "llm_count", "human_count",
                         "llm_doc_fraction", "human_doc_fraction", "examples"])
        for r in reports:
            writer.writerow([" ".join(r.template), r.llm_count, r.human_count,
                             f"{r.llm_doc_fraction:.6f}", f"{r.human_doc_fraction:.6f}",
                             " | ".join(r.representative_sequences[:5])])
    json_path = out / "templates.json"
    _write_json(json_path, {"metadata": metadata, "templates": [r.to_json() for r in reports]})
    paths = [csv_path, json_path]
    if reports:
        fig_path = out / "templates.png"
        top = reports[: min(15, len(reports))]
        _bar(fig_path, [" ".join(r.template) for r in top], [r.llm_count for r in top],
             "flagged templates (LLM occurrence count)", "count")
        paths.append(fig_path)
    return paths


def write_lexical_report(rows: list[tuple[str, float, float]], out_dir: str | Path,
                         metadata: dict) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "lexical.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["term", "llm_doc_fraction", "human_doc_fraction"])
        for term, llm_fraction, human_fraction in rows:
            writer.writerow([term, f"{llm_fraction:.6f}", f"{human_fraction:.6f}"])
    json_path = out / "lexical.json"
    _write_json(json_path, {
        "metadata": metadata,
        "terms": [{"term": t, "llm_doc_fraction": a, "human_doc_fraction": b} for t, a, b in rows],
    })
    paths = [csv_path, json_path]
    if rows:
        fig_path = out / "lexical.png"
        top = rows[: min(20, len(rows))]
        fig, ax = plt.subplots(figsize=(max(4.0, 0.45 * len(top) + 1.5), 3.4))
        xs = range(len(top))
        ax.bar([x - 0.2 for x in xs], [r[1] for r in top], width=0.4, label="LLM", color="#4878a8")
        ax.bar([x + 0.2 for x in xs], [r[2] for r in top], width=0.4, label="human", color="#b0413e")
        ax.set_xticks(list(xs))
        ax.set_xticklabels([r[0] for r in top], rotation=45, ha="right", fontsize=7)
        ax.set_ylabel("document fraction")
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(fig_path, dpi=120)
        plt.close(fig)
        paths.append(fig_path)
    return paths


def write_prefs_report(
    ranks: dict[str, float],
    rank_counts: dict[str, list[int]],
    agreement: dict,
    wilcoxon: list[dict],
    out_dir: str | Path,
) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "ranks.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["condition", "average_rank", "n_rank1", "n_rank2", "n_rank3"])
        for condition in sorted(ranks):
            counts = rank_counts.get(condition, [0, 0, 0])
            writer.writerow([condition, f"{ranks[condition]:.6f}", *counts])
    json_path = out / "prefs.json"
    _write_json(json_path, {
        "average_ranks": ranks,
        "rank_counts": rank_counts,
        "agreement": agreement,
        "wilcoxon": wilcoxon,
    })
    fig_path = out / "rank_distribution.png"
    conditions = sorted(rank_counts)
    fig, ax = plt.subplots(figsize=(max(4.0, 1.4 * len(conditions) + 1.5), 3.2))
    width = 0.25
    colors = ["#4878a8", "#8a9b5c", "#b0413e"]
    for offset, rank in enumerate((1, 2, 3)):
        xs = [i + (offset - 1) * width for i in range(len(conditions))]
        ax.bar(xs, [rank_counts[c][rank - 1] for c in conditions], width=width,
               label=f"ranked {rank}", color=colors[offset])
    ax.set_xticks(range(len(conditions)))
    ax.set_xticklabels(conditions, fontsize=8)
    ax.set_ylabel("judgments")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(fig_path, dpi=120)
    plt.close(fig)
    return [csv_path, json_path, fig_path]
