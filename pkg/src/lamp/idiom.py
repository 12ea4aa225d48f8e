"""Stylistic idiosyncrasy mining: POS-template contrast between LLM and
human corpora, and lexical over-use detection.

Tagging happens out of process; this module ingests tagger output in a
simple TSV format (Penn Treebank tag names expected). Templates are sliding
tag n-grams of length 5..8, contrasted by document fraction.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import AnnotatedParagraph

TEMPLATE_LENGTHS = frozenset({5, 6, 7, 8})
MAX_EXAMPLES_PER_TEMPLATE = 12
DEFAULT_RARITY_RATIO = 0.5


class IdiomError(ValueError):
    pass


@dataclass(frozen=True)
class TaggedParagraph:
    tokens: tuple[tuple[str, str], ...]  # (surface, tag)
    source_id: str = ""

    def __post_init__(self) -> None:
        if not self.tokens:
            raise IdiomError("tagged paragraph must have at least one token")
        for surface, tag in self.tokens:
            if not tag:
                raise IdiomError(f"empty tag for token {surface!r}")


@dataclass
class TemplateStats:
    count: int = 0
    doc_count: int = 0
    doc_fraction: float = 0.0
    examples: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class TemplateReport:
    template: tuple[str, ...]
    llm_count: int
    human_count: int
    llm_doc_fraction: float
    human_doc_fraction: float
    representative_sequences: tuple[str, ...]

    def to_json(self) -> dict:
        return {
            "template": " ".join(self.template),
            "llm_count": self.llm_count,
            "human_count": self.human_count,
            "llm_doc_fraction": self.llm_doc_fraction,
            "human_doc_fraction": self.human_doc_fraction,
            "representative_sequences": list(self.representative_sequences),
        }


def load_tagged(path: str | Path) -> list[TaggedParagraph]:
    """Parse a tagged corpus: one `surface<TAB>tag` per line, blank line ends
    a paragraph, optional `# id: <source_id>` comment before a paragraph.
    Windows line endings are tolerated.
    """
    paragraphs: list[TaggedParagraph] = []
    tokens: list[tuple[str, str]] = []
    source_id = ""
    with open(path, encoding="utf-8", newline="") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                if tokens:
                    paragraphs.append(TaggedParagraph(tuple(tokens), source_id))
                    tokens, source_id = [], ""
                continue
            if line.startswith("#"):
                match = re.match(r"#\s*id:\s*(.+)$", line)
                if match:
                    source_id = match.group(1).strip()
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise IdiomError(
                    f"{path}: line {lineno}: expected 'surface<TAB>tag', got {line!r}"
                )
            tokens.append((parts[0], parts[1]))
    if tokens:
        paragraphs.append(TaggedParagraph(tuple(tokens), source_id))
    return paragraphs


def extract_templates(
    corpus: Sequence[TaggedParagraph], lengths: Iterable[int]
) -> dict[tuple[str, ...], TemplateStats]:
    """Count sliding tag n-grams; doc_fraction is the share of paragraphs
    containing the template at least once. Representative surface sequences
    are capped, first-seen order.
    """
    lengths = sorted(set(lengths))
    if not lengths:
        raise IdiomError("lengths must be non-empty")
    bad = [n for n in lengths if n not in TEMPLATE_LENGTHS]
    if bad:
        raise IdiomError(f"unsupported template lengths {bad}; allowed: 5..8")
    stats: dict[tuple[str, ...], TemplateStats] = {}
    total_docs = len(corpus)
    for para in corpus:
        tags = [tag for _, tag in para.tokens]
        surfaces = [surface for surface, _ in para.tokens]
        seen_here: set[tuple[str, ...]] = set()
        for n in lengths:
            for i in range(len(tags) - n + 1):
                template = tuple(tags[i : i + n])
                entry = stats.setdefault(template, TemplateStats())
                entry.count += 1
                if template not in seen_here:
                    entry.doc_count += 1
                    seen_here.add(template)
                if len(entry.examples) < MAX_EXAMPLES_PER_TEMPLATE:
                    entry.examples.append(" ".join(surfaces[i : i + n]))
    for entry in stats.values():
        entry.doc_fraction = entry.doc_count / total_docs if total_docs else 0.0
    return stats


def contrast_templates(
    llm: dict[tuple[str, ...], TemplateStats],
    human: dict[tuple[str, ...], TemplateStats],
    top_k: int = 50,
    rarity_ratio: float = DEFAULT_RARITY_RATIO,
) -> list[TemplateReport]:
    """Flag the top-k most frequent LLM templates that are disproportionately
    rare in the human corpus (human_doc_fraction < rarity_ratio * llm's).

    Ties in the top-k cut and in the output ordering break lexicographically
    on the tag sequence so results are deterministic.
    """
    if top_k <= 0:
        raise IdiomError("top_k must be positive")
    ranked = sorted(llm.items(), key=lambda kv: (-kv[1].count, kv[0]))[:top_k]
    reports = []
    for template, stats in ranked:
        human_stats = human.get(template, TemplateStats())
        if human_stats.doc_fraction < rarity_ratio * stats.doc_fraction:
            reports.append(
                TemplateReport(
                    template=template,
                    llm_count=stats.count,
                    human_count=human_stats.count,
                    llm_doc_fraction=stats.doc_fraction,
                    human_doc_fraction=human_stats.doc_fraction,
                    representative_sequences=tuple(stats.examples),
                )
            )
    reports.sort(key=lambda r: (-r.llm_count, r.template))
    return reports


_WORD_RE = re.compile(r"[\w']+", re.UNICODE)


def default_phrase_list() -> list[str]:
    """Phrases shipped as a config asset for the lexical contrast."""
    text = resources.files("lamp").joinpath("data/idiom_phrases.txt").read_text("utf-8")
    return [line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#")]


def _doc_terms(text: str, phrases: Sequence[str]) -> set[str]:
    lowered = text.lower()
    terms = set(_WORD_RE.findall(lowered))
    for phrase in phrases:
        pattern = r"\b" + r"\s+".join(re.escape(w) for w in phrase.lower().split()) + r"\b"
        if re.search(pattern, lowered):
            terms.add(phrase.lower())
    return terms


def contrast_lexical(
    llm_texts: Sequence[str],
    human_texts: Sequence[str],
    min_llm_fraction: float,
    max_human_fraction: float,
    phrases: Sequence[str] | None = None,
) -> list[tuple[str, float, float]]:
    """Terms (unigrams plus the configured phrase list) common in LLM text
    and rare in human text, by case-insensitive document fraction.
    """
    if not llm_texts:
        raise IdiomError("empty LLM corpus")
    for name, value in (("min_llm_fraction", min_llm_fraction), ("max_human_fraction", max_human_fraction)):
        if not (0.0 <= value <= 1.0):
            raise IdiomError(f"{name} must be in [0,1], got {value}")
    if phrases is None:
        phrases = default_phrase_list()
    llm_docs = [_doc_terms(t, phrases) for t in llm_texts]
    human_docs = [_doc_terms(t, phrases) for t in human_texts]
    candidates = set().union(*llm_docs)
    flagged = []
    for term in candidates:
        llm_fraction = sum(1 for d in llm_docs if term in d) / len(llm_docs)
        if llm_fraction < min_llm_fraction:
            continue
        human_fraction = (
            sum(1 for d in human_docs if term in d) / len(human_docs) if human_docs else 0.0
        )
        if human_fraction <= max_human_fraction:
            flagged.append((term, llm_fraction, human_fraction))
    flagged.sort(key=lambda item: (-item[1], item[0]))
    return flagged


def edited_template_fractions(
    tagged: Sequence[TaggedParagraph],
    annotated: Sequence[AnnotatedParagraph],
    lengths: Iterable[int],
) -> dict[tuple[str, ...], float]:
    """Optional join with the edit corpus: per template, the fraction of its
    occurrences whose character range intersects some live edit span.

    Tokens are aligned to the response text left to right; paragraphs whose
    tokens cannot be located are skipped.
    """
    by_id = {p.record.id: p for p in annotated}
    totals: dict[tuple[str, ...], int] = {}
    hits: dict[tuple[str, ...], int] = {}
    lengths = sorted(set(lengths))
    for para in tagged:
        annotated_para = by_id.get(para.source_id)
        if annotated_para is None:
            continue
        text = annotated_para.record.response
        offsets: list[tuple[int, int]] = []
        cursor = 0
        ok = True
        for surface, _ in para.tokens:
            pos = text.find(surface, cursor)
            if pos < 0:
                ok = False
                break
            offsets.append((pos, pos + len(surface)))
            cursor = pos + len(surface)
        if not ok:
            continue
        spans = [(e.start, e.end) for e in annotated_para.live_edits]
        tags = [tag for _, tag in para.tokens]
        for n in lengths:
            for i in range(len(tags) - n + 1):
                template = tuple(tags[i : i + n])
                start = offsets[i][0]
                end = offsets[i + n - 1][1]
                totals[template] = totals.get(template, 0) + 1
                if any(s < end and start < e for s, e in spans):
                    hits[template] = hits.get(template, 0) + 1
    return {t: hits.get(t, 0) / count for t, count in totals.items()}
