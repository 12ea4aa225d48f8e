"""Generation and automatic-editing machinery: instruction backtranslation,
venue-conditioned response generation, few-shot span detection, category
rewriting, and paragraph editing in oracle or fully automatic mode.

Prompts are versioned text assets under lamp/templates; placeholders use
{{name}} syntax and are substituted literally.
"""

from __future__ import annotations

import difflib
import json
import logging
import random
import re
import unicodedata
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from importlib import resources

from .corpus import (
    CATEGORY_DISPLAY,
    CATEGORY_NAMES,
    AnnotatedParagraph,
    EditCategory,
    EditSpan,
    Genre,
)
from .editops import apply_edits
from .llmclient import CompletionRequest, Provider, complete

log = logging.getLogger(__name__)

DETECTION_SHOTS = (2, 5, 25)
DEFAULT_REWRITE_EXAMPLES = 25
# Minimum share of a predicted span that the longest common substring must
# cover for fuzzy resolution to accept it.
LCS_RESOLUTION_RATIO = 0.9


class PipelineError(RuntimeError):
    pass


class DetectionParseError(PipelineError):
    """No parseable JSON array in the detector output."""


class MalformedRewriteError(PipelineError):
    """Rewrite output was not a quoted span."""


def _load_template(name: str) -> str:
    return resources.files("lamp").joinpath(f"templates/{name}").read_text("utf-8")


def render_template(template: str, **substitutions: str) -> str:
    """Substitute {{key}} placeholders in a single pass (text inside a
    substituted value is never re-substituted); every key must appear."""
    missing = [key for key in substitutions if "{{" + key + "}}" not in template]
    if missing:
        raise PipelineError(f"template is missing placeholder {{{{{missing[0]}}}}}")
    pattern = re.compile(r"\{\{(" + "|".join(map(re.escape, substitutions)) + r")\}\}")
    return pattern.sub(lambda match: substitutions[match.group(1)], template)


class VenueName(str, Enum):
    NEWYORKER_FICTION = "NewYorkerFiction"
    NYT_MODERN_LOVE = "NYTModernLove"
    NYT_COOKING = "NYTCooking"
    NYT_TRAVEL = "NYTTravel"
    INTERNET_ADVICE_COLUMNIST = "InternetAdviceColumnist"


_VENUE_TEMPLATES = {
    VenueName.NEWYORKER_FICTION: "generate_newyorker_fiction.txt",
    VenueName.NYT_MODERN_LOVE: "generate_nyt_modern_love.txt",
    VenueName.NYT_COOKING: "generate_nyt_cooking.txt",
    VenueName.NYT_TRAVEL: "generate_nyt_travel.txt",
    VenueName.INTERNET_ADVICE_COLUMNIST: "generate_internet_advice.txt",
}

VENUE_GENRE = {
    VenueName.NEWYORKER_FICTION: Genre.FICTION,
    VenueName.NYT_MODERN_LOVE: Genre.PERSONAL_ESSAY,
    VenueName.NYT_COOKING: Genre.FOOD_WRITING,
    VenueName.NYT_TRAVEL: Genre.TRAVEL_WRITING,
    VenueName.INTERNET_ADVICE_COLUMNIST: Genre.INTERNET_ADVICE,
}


@dataclass(frozen=True)
class Venue:
    name: VenueName
    prompt_template: str

    def __post_init__(self) -> None:
        if "{{instruction}}" not in self.prompt_template:
            raise PipelineError(f"venue {self.name} template lacks {{{{instruction}}}}")


def get_venue(name: VenueName | str) -> Venue:
    name = VenueName(name)
    return Venue(name=name, prompt_template=_load_template(_VENUE_TEMPLATES[name]))


@dataclass
class PipelineConfig:
    """Knobs shared by the generation and editing operations."""

    model: str
    seed: int = 0
    detect_temperature: float = 0.0
    rewrite_temperature: float = 0.0
    generate_temperature: float = 0.7
    max_tokens: int = 1024
    rewrite_examples_per_category: int = DEFAULT_REWRITE_EXAMPLES
    jobs: int = 1


# ---------------------------------------------------------------------------
# Generation (backtranslation + venue-conditioned responses)
# ---------------------------------------------------------------------------


def build_backtranslation_prompt(paragraph: str) -> str:
    if not paragraph:
        raise PipelineError("paragraph must be non-empty")
    return render_template(_load_template("backtranslate.txt"), paragraph=paragraph)


def backtranslate_instruction(
    paragraph: str, provider: Provider, config: PipelineConfig
) -> str:
    """Reverse-engineer a writing instruction from an existing paragraph."""
    request = CompletionRequest(
        model=config.model,
        user=build_backtranslation_prompt(paragraph),
        temperature=config.generate_temperature,
        max_tokens=config.max_tokens,
    )
    return complete(provider, request).strip()


def build_generation_prompt(instruction: str, venue: Venue) -> str:
    if not instruction:
        raise PipelineError("instruction must be non-empty")
    return render_template(venue.prompt_template, instruction=instruction)


def generate_response(
    instruction: str, venue: Venue, provider: Provider, config: PipelineConfig
) -> str:
    """Generate a response to the instruction in the voice of the venue."""
    request = CompletionRequest(
        model=config.model,
        user=build_generation_prompt(instruction, venue),
        temperature=config.generate_temperature,
        max_tokens=config.max_tokens,
    )
    return complete(provider, request).strip()


# ---------------------------------------------------------------------------
# Detection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DetectionExemplar:
    paragraph: str
    spans: tuple[tuple[str, EditCategory], ...]  # (verbatim span, category)


def exemplar_from_annotated(paragraph: AnnotatedParagraph) -> DetectionExemplar:
    return DetectionExemplar(
        paragraph=paragraph.record.response,
        spans=tuple((e.original, e.category) for e in paragraph.live_edits),
    )


def _detection_output_json(spans: tuple[tuple[str, EditCategory], ...]) -> str:
    items = [{"span": text, "category": cat.display} for text, cat in spans]
    return json.dumps(items, ensure_ascii=False)


def build_detection_prompt(
    exemplars: list[DetectionExemplar], shots: int, paragraph: str
) -> str:
    """Assemble the few-shot span-detection prompt.

    The prompt carries the seven category definitions, `shots` worked
    examples drawn from the exemplar pool, the selection rules, and the
    target paragraph.
    """
    if shots < 1:
        raise PipelineError("shots must be >= 1")
    if len(exemplars) < shots:
        raise PipelineError(f"need {shots} exemplars, got {len(exemplars)}")
    blocks = []
    for i, ex in enumerate(exemplars[:shots], start=1):
        blocks.append(
            f"Example {i}:\nInput Text:\n{ex.paragraph}\n\n"
            f"Output:\n{_detection_output_json(ex.spans)}\n"
        )
    return render_template(
        _load_template("detect.txt"),
        shots=str(shots),
        examples="\n".join(blocks),
        paragraph=paragraph,
    )


@dataclass(frozen=True)
class SpanPrediction:
    raw_span: str
    category: EditCategory
    resolved: tuple[int, int] | None = None


def _strip_accents(text: str) -> str:
    return "".join(
        c for c in unicodedata.normalize("NFD", text) if not unicodedata.combining(c)
    )


def _category_from_name(raw: str) -> EditCategory | None:
    """Map a model-emitted category name onto the taxonomy, tolerantly."""
    key = re.sub(r"\s+", " ", _strip_accents(raw)).strip().lower()
    aliases: dict[str, str] = {}
    for name in CATEGORY_NAMES:
        aliases[name.lower()] = name
        aliases[CATEGORY_DISPLAY[name].lower()] = name
    aliases.update(
        {
            "unnecessary exposition": "UnnecessaryRedundantExposition",
            "redundant exposition": "UnnecessaryRedundantExposition",
            "unnecessary or redundant exposition": "UnnecessaryRedundantExposition",
            "tense consistency": "TenseInconsistency",
        }
    )
    name = aliases.get(key)
    return EditCategory(name) if name else None


def _first_json_array(text: str) -> list:
    decoder = json.JSONDecoder()
    for idx, char in enumerate(text):
        if char != "[":
            continue
        try:
            value, _ = decoder.raw_decode(text[idx:])
        except json.JSONDecodeError:
            continue
        if isinstance(value, list):
            return value
    raise DetectionParseError(f"no JSON array found in detector output: {text!r}")


def resolve_span(paragraph: str, raw: str) -> tuple[int, int] | None:
    """Locate a predicted span: exact match, then whitespace-normalized
    match, then longest-common-substring covering >= 90% of the span.
    """
    if not raw:
        return None
    idx = paragraph.find(raw)
    if idx >= 0:
        return (idx, idx + len(raw))
    tokens = raw.split()
    if tokens:
        pattern = r"\s+".join(re.escape(t) for t in tokens)
        match = re.search(pattern, paragraph)
        if match:
            return match.span()
    matcher = difflib.SequenceMatcher(None, paragraph, raw, autojunk=False)
    block = matcher.find_longest_match(0, len(paragraph), 0, len(raw))
    if block.size > 0 and block.size >= LCS_RESOLUTION_RATIO * len(raw):
        return (block.a, block.a + block.size)
    return None


def parse_detection_output(
    raw_model_text: str,
    paragraph: str,
    diagnostics: list[str] | None = None,
) -> list[SpanPrediction]:
    """Extract and resolve span predictions from raw detector output.

    Unknown categories and unresolvable spans are dropped with a diagnostic;
    spans overlapping an earlier-listed span are dropped likewise.
    """
    sink = diagnostics if diagnostics is not None else []
    items = _first_json_array(raw_model_text)
    kept: list[SpanPrediction] = []
    taken: list[tuple[int, int]] = []
    for item in items:
        if not isinstance(item, dict) or "span" not in item or "category" not in item:
            sink.append(f"dropped malformed item {item!r}")
            continue
        raw_span = str(item["span"])
        category = _category_from_name(str(item["category"]))
        if category is None:
            sink.append(f"dropped span with unknown category {item['category']!r}")
            continue
        resolved = resolve_span(paragraph, raw_span)
        if resolved is None:
            sink.append(f"dropped unresolvable span {raw_span!r}")
            continue
        if any(resolved[0] < e and s < resolved[1] for s, e in taken):
            sink.append(f"dropped overlapping span {raw_span!r} at {resolved}")
            continue
        taken.append(resolved)
        kept.append(SpanPrediction(raw_span=raw_span, category=category, resolved=resolved))
    if diagnostics is None:
        for message in sink:
            log.warning("detection: %s", message)
    return kept


def detect_spans(
    paragraph: str,
    provider: Provider,
    shots: int,
    exemplars: list[DetectionExemplar],
    config: PipelineConfig,
    diagnostics: list[str] | None = None,
) -> list[SpanPrediction]:
    """Few-shot detection: build prompt, complete, parse and resolve."""
    request = CompletionRequest(
        model=config.model,
        user=build_detection_prompt(exemplars, shots, paragraph),
        temperature=config.detect_temperature,
        max_tokens=config.max_tokens,
    )
    raw = complete(provider, request)
    return parse_detection_output(raw, paragraph, diagnostics)


# ---------------------------------------------------------------------------
# Rewriting
# ---------------------------------------------------------------------------

_REWRITE_TEMPLATES = {
    "Cliche": "rewrite_cliche.txt",
    "UnnecessaryRedundantExposition": "rewrite_unnecessary_redundant_exposition.txt",
    "PurpleProse": "rewrite_purple_prose.txt",
    "PoorSentenceStructure": "rewrite_poor_sentence_structure.txt",
    "LackOfSpecificityAndDetail": "rewrite_lack_of_specificity_and_detail.txt",
    "AwkwardWordChoiceAndPhrasing": "rewrite_awkward_word_choice_and_phrasing.txt",
    "TenseInconsistency": "rewrite_tense_inconsistency.txt",
}


@dataclass(frozen=True)
class RewriteExemplar:
    paragraph: str
    start: int
    end: int
    replacement: str

    @property
    def original(self) -> str:
        return self.paragraph[self.start : self.end]


def _tag_span(paragraph: str, start: int, end: int) -> str:
    return f"{paragraph[:start]}<span>{paragraph[start:end]}</span>{paragraph[end:]}"


def build_rewrite_prompt(
    category: EditCategory,
    exemplars: list[RewriteExemplar],
    paragraph: str,
    start: int,
    end: int,
) -> str:
    if category.is_other:
        raise PipelineError(f"no rewrite template for Other({category.other_name!r})")
    blocks = []
    for i, ex in enumerate(exemplars, start=1):
        blocks.append(
            f"Example {i}\n\n"
            f"Paragraph: {_tag_span(ex.paragraph, ex.start, ex.end)}\n"
            f'Original Span: "{ex.original}"\n'
            f'Edited Span: "{ex.replacement}"\n'
        )
    return render_template(
        _load_template(_REWRITE_TEMPLATES[category.name]),
        example_count=str(len(exemplars)),
        examples="\n".join(blocks),
        paragraph=_tag_span(paragraph, start, end),
        original_span=paragraph[start:end],
    )


def parse_rewrite_output(raw: str) -> str:
    """Extract the quoted edited span; `""` means deletion."""
    text = raw.strip()
    text = re.sub(r"^Edited Span:\s*", "", text)
    if not text.startswith('"'):
        raise MalformedRewriteError(f"rewrite output does not start with a quote: {raw!r}")
    end = text.rfind('"')
    if end == 0:
        raise MalformedRewriteError(f"rewrite output missing closing quote: {raw!r}")
    return text[1:end]


def rewrite_span(
    paragraph: str,
    span: SpanPrediction,
    exemplars_for_category: list[RewriteExemplar],
    provider: Provider,
    config: PipelineConfig,
) -> str:
    """Rewrite one resolved span with the category-specific prompt."""
    if span.resolved is None:
        raise PipelineError(f"span {span.raw_span!r} is not resolved")
    start, end = span.resolved
    request = CompletionRequest(
        model=config.model,
        user=build_rewrite_prompt(span.category, exemplars_for_category, paragraph, start, end),
        temperature=config.rewrite_temperature,
        max_tokens=config.max_tokens,
    )
    return parse_rewrite_output(complete(provider, request))


_PUNCTUATION = set(".,;:!?…\"'“”‘’-—()[]")


def _char_class(c: str) -> str:
    if c.isupper():
        return "upper"
    if c.islower():
        return "lower"
    return "other"


def boundary_violations(original: str, replacement: str) -> list[str]:
    """Check the casing/punctuation compatibility the rewrite prompts ask
    for; deletions are exempt. Violations are report material, not errors.
    """
    if replacement == "":
        return []
    issues = []
    if _char_class(original[0]) != _char_class(replacement[0]):
        issues.append("leading character case class changed")
    if (original[0] in _PUNCTUATION) != (replacement[0] in _PUNCTUATION):
        issues.append("leading punctuation presence changed")
    if (original[-1] in _PUNCTUATION) != (replacement[-1] in _PUNCTUATION):
        issues.append("trailing punctuation presence changed")
    return issues


# ---------------------------------------------------------------------------
# End-to-end paragraph editing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OracleSpans:
    """Writer-provided spans: rewriting only, detection skipped."""

    spans: tuple[SpanPrediction, ...]


@dataclass(frozen=True)
class FullDetect:
    """Fully automatic: detect problematic spans, then rewrite them."""

    shots: int
    exemplars: tuple[DetectionExemplar, ...]


@dataclass(frozen=True)
class EditedParagraph:
    original: str
    edits: tuple[EditSpan, ...]
    final: str
    mode: str  # "oracle" | "full"
    shots: int
    model: str = ""
    id: str = ""

    def __post_init__(self) -> None:
        if self.final != apply_edits(self.original, self.edits):
            raise PipelineError("final text does not equal the applied edits")

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "original": self.original,
            "edits": [e.to_json() for e in self.edits],
            "final": self.final,
            "mode": self.mode,
            "shots": self.shots,
            "model": self.model,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EditedParagraph":
        return cls(
            original=obj["original"],
            edits=tuple(EditSpan.from_json(e) for e in obj["edits"]),
            final=obj["final"],
            mode=obj["mode"],
            shots=obj["shots"],
            model=obj.get("model", ""),
            id=obj.get("id", ""),
        )


def spans_from_edits(edits: list[EditSpan] | tuple[EditSpan, ...], paragraph: str) -> OracleSpans:
    """Turn writer edits into oracle span predictions (ranges + categories)."""
    predictions = tuple(
        SpanPrediction(
            raw_span=paragraph[e.start : e.end],
            category=e.category,
            resolved=(e.start, e.end),
        )
        for e in edits
        if not e.undone
    )
    return OracleSpans(spans=predictions)


def sample_detection_exemplars(
    train: list[AnnotatedParagraph], shots: int, seed: int
) -> list[DetectionExemplar]:
    """Pick `shots` exemplars from the train split with a fixed seed."""
    candidates = [p for p in train if p.live_edits]
    if len(candidates) < shots:
        raise PipelineError(f"train split has {len(candidates)} usable exemplars, need {shots}")
    rng = random.Random(seed)
    return [exemplar_from_annotated(p) for p in rng.sample(candidates, shots)]


def sample_rewrite_exemplars(
    train: list[AnnotatedParagraph],
    per_category: int,
    seed: int,
) -> dict[str, list[RewriteExemplar]]:
    """Sample up to `per_category` rewrite exemplars per taxonomy category,
    once per run, with a fixed seed. Other-category edits are not usable.
    """
    pools: dict[str, list[RewriteExemplar]] = {name: [] for name in CATEGORY_NAMES}
    for para in train:
        for e in para.live_edits:
            if e.category.is_other:
                continue
            pools[e.category.name].append(
                RewriteExemplar(
                    paragraph=para.record.response,
                    start=e.start,
                    end=e.end,
                    replacement=e.replacement,
                )
            )
    rng = random.Random(seed)
    sampled = {}
    for name, pool in pools.items():
        k = min(per_category, len(pool))
        sampled[name] = rng.sample(pool, k) if k else []
    return sampled


def edit_paragraph(
    paragraph: str,
    provider: Provider,
    mode: OracleSpans | FullDetect,
    config: PipelineConfig,
    rewrite_exemplars: dict[str, list[RewriteExemplar]],
    record_id: str = "",
    diagnostics: list[str] | None = None,
) -> EditedParagraph:
    """Run the two-stage edit pipeline on one paragraph.

    Oracle mode rewrites the supplied spans; full mode detects spans first.
    Both share the identical rewriting path. Per-span rewrites may run
    concurrently; the splice is a single final step.
    """
    sink = diagnostics if diagnostics is not None else []
    if isinstance(mode, FullDetect):
        spans = detect_spans(
            paragraph, provider, mode.shots, list(mode.exemplars), config, sink
        )
        mode_name, shots = "full", mode.shots
    else:
        spans = [s for s in mode.spans if s.resolved is not None]
        mode_name, shots = "oracle", 0

    usable: list[SpanPrediction] = []
    for span in spans:
        if span.category.is_other:
            sink.append(f"skipped Other-category span {span.raw_span!r} (no rewrite template)")
            continue
        usable.append(span)

    def run(span: SpanPrediction) -> str:
        return rewrite_span(
            paragraph, span, rewrite_exemplars.get(span.category.name, []), provider, config
        )

    if config.jobs > 1 and len(usable) > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            replacements = list(pool.map(run, usable))
    else:
        replacements = [run(span) for span in usable]

    edits = []
    for order, (span, replacement) in enumerate(zip(usable, replacements)):
        start, end = span.resolved  # type: ignore[misc]
        for issue in boundary_violations(paragraph[start:end], replacement):
            sink.append(f"boundary: {issue} for span {span.raw_span!r}")
        edits.append(
            EditSpan(
                start=start,
                end=end,
                original=paragraph[start:end],
                replacement=replacement,
                category=span.category,
                annotator=config.model,
                order_index=order,
                undone=False,
            )
        )
    if diagnostics is None:
        for message in sink:
            log.info("edit_paragraph[%s]: %s", record_id, message)
    return EditedParagraph(
        original=paragraph,
        edits=tuple(edits),
        final=apply_edits(paragraph, edits),
        mode=mode_name,
        shots=shots,
        model=config.model,
        id=record_id,
    )
