"""HTTP service hosting the two human tasks: span-edit annotation with
chronological logging and undo, and anonymized 3-way preference ranking.

Persistence is a single append-only JSONL event log; replaying the log from
empty reconstructs the exact service state, which is the crash-recovery
story. All mutations go through one lock so the log is written by a single
writer.
"""

from __future__ import annotations

import hashlib
import json
import random
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable

import pydantic as _pydantic

from .corpus import (
    AnnotatedParagraph,
    CorpusError,
    EditCategory,
    EditSpan,
    ParagraphRecord,
    QualityScores,
    dumps_record,
)
from .evalstats import CONDITIONS, PreferenceJudgment


class AnnotationError(ValueError):
    def __init__(self, message: str, status: int = 400) -> None:
        super().__init__(message)
        self.status = status


@dataclass(frozen=True)
class Triplet:
    """Three variants of one paragraph, keyed by condition name."""

    triplet_id: str
    conditions: dict[str, str]  # condition -> text
    source_paragraph_id: str = ""
    excluded_judges: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        names = set(self.conditions)
        if len(names) != 3:
            raise AnnotationError(f"triplet {self.triplet_id!r} must have 3 conditions")
        if not {"LLMGenerated", "WriterEdited"} <= names:
            raise AnnotationError(
                f"triplet {self.triplet_id!r} must include LLMGenerated and WriterEdited"
            )
        unknown = names - set(CONDITIONS)
        if unknown:
            raise AnnotationError(f"triplet {self.triplet_id!r}: unknown conditions {unknown}")

    def to_json(self) -> dict:
        return {
            "triplet_id": self.triplet_id,
            "conditions": self.conditions,
            "source_paragraph_id": self.source_paragraph_id,
            "excluded_judges": list(self.excluded_judges),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Triplet":
        return cls(
            triplet_id=obj["triplet_id"],
            conditions=dict(obj["conditions"]),
            source_paragraph_id=obj.get("source_paragraph_id", ""),
            excluded_judges=tuple(obj.get("excluded_judges", ())),
        )


def load_triplets(path: str | Path) -> list[Triplet]:
    triplets = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                triplets.append(Triplet.from_json(json.loads(line)))
    return triplets


def save_triplets(triplets: Iterable[Triplet], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for t in triplets:
            f.write(json.dumps(t.to_json(), ensure_ascii=False) + "\n")


def build_triplets(
    corpus: list[AnnotatedParagraph],
    edited_by_id: dict[str, str],
    mode_by_id: dict[str, str],
) -> list[Triplet]:
    """Assemble ranking triplets from annotated paragraphs and pipeline
    output. `edited_by_id` maps paragraph id to the machine-edited text;
    `mode_by_id` maps it to "oracle" or "full" (conditions alternate when
    the caller interleaves modes).
    """
    from .editops import apply_edits  # local import to avoid a cycle at import time

    triplets = []
    for para in corpus:
        rid = para.record.id
        if rid not in edited_by_id:
            continue
        condition = "LLMEditedOracle" if mode_by_id[rid] == "oracle" else "LLMEditedFull"
        writer_edited = apply_edits(para.record.response, para.edits)
        editors = sorted({e.annotator for e in para.edits})
        triplets.append(
            Triplet(
                triplet_id=f"t-{rid}",
                conditions={
                    "LLMGenerated": para.record.response,
                    "WriterEdited": writer_edited,
                    condition: edited_by_id[rid],
                },
                source_paragraph_id=rid,
                excluded_judges=tuple(editors),
            )
        )
    return triplets


def display_shuffle(triplet_id: str, judge: str, conditions: Iterable[str]) -> list[str]:
    """Deterministic per-(triplet, judge) shuffle of the condition names."""
    digest = hashlib.sha256(f"{triplet_id}|{judge}".encode("utf-8")).digest()
    seed = int.from_bytes(digest[:8], "big")
    order = sorted(conditions)
    random.Random(seed).shuffle(order)
    return order


@dataclass
class ServiceConfig:
    annotators: tuple[str, ...] = ()
    judges: tuple[str, ...] = ()
    redundancy_ids: frozenset[str] = frozenset()
    redundancy: int = 3
    judges_per_triplet: int = 3

    @classmethod
    def from_json(cls, obj: dict) -> "ServiceConfig":
        return cls(
            annotators=tuple(obj.get("annotators", ())),
            judges=tuple(obj.get("judges", ())),
            redundancy_ids=frozenset(obj.get("redundancy_ids", ())),
            redundancy=obj.get("redundancy", 3),
            judges_per_triplet=obj.get("judges_per_triplet", 3),
        )


ANNOTATION_EVENT_KINDS = ("add_edit", "undo", "submit_scores")


@dataclass(frozen=True)
class EditEvent:
    """One annotation-task event as stored in the log.

    `seq` is server-assigned and strictly increasing per session; the edit
    payload is present for add_edit, the scores payload for submit_scores.
    """

    session: str
    paragraph_id: str
    kind: str  # one of ANNOTATION_EVENT_KINDS
    seq: int
    at: str
    edit: EditSpan | None = None
    scores: QualityScores | None = None

    @classmethod
    def from_json(cls, obj: dict) -> "EditEvent":
        if obj["kind"] not in ANNOTATION_EVENT_KINDS:
            raise AnnotationError(f"not an annotation event: {obj['kind']!r}")
        return cls(
            session=obj["session"],
            paragraph_id=obj["paragraph_id"],
            kind=obj["kind"],
            seq=obj["seq"],
            at=obj["at"],
            edit=EditSpan.from_json(obj["edit"]) if "edit" in obj else None,
            scores=QualityScores.from_json(obj["scores"]) if "scores" in obj else None,
        )


def iter_log_events(log_path: str | Path) -> Iterable[EditEvent]:
    """Typed view of the annotation-task events in an event log (assignment
    and preference events are skipped)."""
    with open(log_path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            obj = json.loads(line)
            if obj.get("kind") in ANNOTATION_EVENT_KINDS:
                yield EditEvent.from_json(obj)


@dataclass(frozen=True)
class RankingSubmission:
    triplet_id: str
    judge: str
    ranks: tuple[int, int, int]  # rank per displayed slot

    def __post_init__(self) -> None:
        if sorted(self.ranks) != [1, 2, 3]:
            raise AnnotationError(f"ranks {list(self.ranks)} are not a permutation of 1..3")


class AnnotationService:
    """In-memory state fed exclusively by the append-only event log."""

    def __init__(
        self,
        paragraphs: list[ParagraphRecord],
        triplets: list[Triplet],
        config: ServiceConfig,
        log_path: str | Path,
    ) -> None:
        self.paragraph_order = [p.id for p in paragraphs]
        self.paragraphs = {p.id: p for p in paragraphs}
        if len(self.paragraphs) != len(paragraphs):
            raise AnnotationError("duplicate paragraph ids")
        self.triplet_order = [t.triplet_id for t in triplets]
        self.triplets = {t.triplet_id: t for t in triplets}
        self.config = config
        self.log_path = Path(log_path)
        self._lock = threading.Lock()

        # state rebuilt from the log
        self.assigned: dict[str, list[str]] = {pid: [] for pid in self.paragraph_order}
        self.open_assignment: dict[str, str] = {}
        self.edits: dict[tuple[str, str], list[EditSpan]] = {}
        self.scores: dict[tuple[str, str], QualityScores] = {}
        self.session_seq: dict[str, int] = {}
        self.served: dict[str, dict[str, list[str]]] = {tid: {} for tid in self.triplet_order}
        self.open_serve: dict[str, str] = {}
        self.rankings: dict[tuple[str, str], tuple[int, int, int]] = {}

        if self.log_path.exists():
            with open(self.log_path, encoding="utf-8") as f:
                for line in f:
                    if line.strip():
                        self._apply(json.loads(line))

    # -- event plumbing ----------------------------------------------------

    def _commit(self, event: dict) -> None:
        """Apply an event and append it to the log (caller holds the lock)."""
        self._apply(event)
        with open(self.log_path, "a", encoding="utf-8") as f:
            f.write(json.dumps(event, ensure_ascii=False) + "\n")
            f.flush()

    def _next_seq(self, session: str) -> int:
        return self.session_seq.get(session, 0) + 1

    def _apply(self, event: dict) -> None:
        kind = event["kind"]
        if kind == "assign":
            pid, annotator = event["paragraph_id"], event["annotator"]
            self.assigned[pid].append(annotator)
            self.open_assignment[annotator] = pid
        elif kind == "add_edit":
            session, pid = event["session"], event["paragraph_id"]
            self.session_seq[session] = event["seq"]
            self.edits.setdefault((pid, session), []).append(EditSpan.from_json(event["edit"]))
        elif kind == "undo":
            session, pid = event["session"], event["paragraph_id"]
            self.session_seq[session] = event["seq"]
            key = (pid, session)
            live = [i for i, e in enumerate(self.edits[key]) if not e.undone]
            idx = live[-1]
            edit = self.edits[key][idx]
            self.edits[key][idx] = EditSpan.from_json({**edit.to_json(), "undone": True})
        elif kind == "submit_scores":
            session, pid = event["session"], event["paragraph_id"]
            self.session_seq[session] = event["seq"]
            self.scores[(pid, session)] = QualityScores.from_json(event["scores"])
            if self.open_assignment.get(session) == pid:
                del self.open_assignment[session]
        elif kind == "serve_triplet":
            tid, judge = event["triplet_id"], event["judge"]
            self.served[tid][judge] = list(event["display_order"])
            self.open_serve[judge] = tid
        elif kind == "submit_ranking":
            tid, judge = event["triplet_id"], event["judge"]
            self.rankings[(tid, judge)] = tuple(event["ranks"])
            if self.open_serve.get(judge) == tid:
                del self.open_serve[judge]
        else:
            raise AnnotationError(f"unknown event kind {kind!r} in log")

    @staticmethod
    def _now() -> str:
        return datetime.now(timezone.utc).isoformat()

    # -- editing task --------------------------------------------------------

    def next_task(self, annotator: str) -> ParagraphRecord | None:
        if annotator not in self.config.annotators:
            raise AnnotationError(f"unknown annotator {annotator!r}", status=404)
        with self._lock:
            open_pid = self.open_assignment.get(annotator)
            if open_pid is not None:
                return self.paragraphs[open_pid]
            for pid in self.paragraph_order:
                target = self.config.redundancy if pid in self.config.redundancy_ids else 1
                assignees = self.assigned[pid]
                if len(assignees) < target and annotator not in assignees:
                    self._commit(
                        {
                            "kind": "assign",
                            "paragraph_id": pid,
                            "annotator": annotator,
                            "at": self._now(),
                        }
                    )
                    return self.paragraphs[pid]
        return None

    def submit_edit(
        self,
        session: str,
        paragraph_id: str,
        start: int,
        end: int,
        original: str,
        replacement: str,
        category: EditCategory,
    ) -> int:
        with self._lock:
            paragraph = self.paragraphs.get(paragraph_id)
            if paragraph is None:
                raise AnnotationError(f"unknown paragraph {paragraph_id!r}", status=404)
            text = paragraph.response
            if not (0 <= start < end <= len(text)):
                raise AnnotationError(
                    f"offsets [{start},{end}) invalid for paragraph of length {len(text)}"
                )
            if text[start:end] != original:
                raise AnnotationError(
                    f"original text mismatch at [{start},{end}): "
                    f"server has {text[start:end]!r}"
                )
            key = (paragraph_id, session)
            for e in self.edits.get(key, []):
                if not e.undone and start < e.end and e.start < end:
                    raise AnnotationError(
                        f"span overlaps existing edit [{e.start},{e.end}) "
                        f"({e.original!r})",
                        status=409,
                    )
            order_index = len(self.edits.get(key, []))
            seq = self._next_seq(session)
            edit = EditSpan(
                start=start,
                end=end,
                original=original,
                replacement=replacement,
                category=category,
                annotator=session,
                order_index=order_index,
                undone=False,
            )
            self._commit(
                {
                    "kind": "add_edit",
                    "session": session,
                    "paragraph_id": paragraph_id,
                    "seq": seq,
                    "edit": edit.to_json(),
                    "at": self._now(),
                }
            )
            return seq

    def undo(self, session: str, paragraph_id: str) -> int:
        with self._lock:
            key = (paragraph_id, session)
            live = [e for e in self.edits.get(key, []) if not e.undone]
            if not live:
                raise AnnotationError("nothing to undo", status=409)
            seq = self._next_seq(session)
            self._commit(
                {
                    "kind": "undo",
                    "session": session,
                    "paragraph_id": paragraph_id,
                    "seq": seq,
                    "at": self._now(),
                }
            )
            return seq

    def submit_scores(self, session: str, paragraph_id: str, iwqs: int, fwqs: int) -> int:
        with self._lock:
            if paragraph_id not in self.paragraphs:
                raise AnnotationError(f"unknown paragraph {paragraph_id!r}", status=404)
            if (paragraph_id, session) in self.scores:
                raise AnnotationError("scores already submitted", status=409)
            try:
                scores = QualityScores(iwqs=iwqs, fwqs=fwqs, annotator=session)
            except CorpusError as exc:
                raise AnnotationError(str(exc)) from exc
            seq = self._next_seq(session)
            self._commit(
                {
                    "kind": "submit_scores",
                    "session": session,
                    "paragraph_id": paragraph_id,
                    "seq": seq,
                    "scores": scores.to_json(),
                    "at": self._now(),
                }
            )
            return seq

    # -- preference task -----------------------------------------------------

    def _judge_edited(self, judge: str, triplet: Triplet) -> bool:
        if judge in triplet.excluded_judges:
            return True
        pid = triplet.source_paragraph_id
        return any(
            key[0] == pid and key[1] == judge and self.edits[key] for key in self.edits
        )

    def next_triplet(self, judge: str) -> dict | None:
        if judge not in self.config.judges:
            raise AnnotationError(f"unknown judge {judge!r}", status=404)
        with self._lock:
            open_tid = self.open_serve.get(judge)
            if open_tid is not None:
                return self._triplet_view(open_tid, judge)
            for tid in self.triplet_order:
                triplet = self.triplets[tid]
                served = self.served[tid]
                if judge in served or (tid, judge) in self.rankings:
                    continue
                if len(served) >= self.config.judges_per_triplet:
                    continue
                if self._judge_edited(judge, triplet):
                    continue
                order = display_shuffle(tid, judge, triplet.conditions)
                self._commit(
                    {
                        "kind": "serve_triplet",
                        "triplet_id": tid,
                        "judge": judge,
                        "display_order": order,
                        "at": self._now(),
                    }
                )
                return self._triplet_view(tid, judge)
        return None

    def _triplet_view(self, triplet_id: str, judge: str) -> dict:
        triplet = self.triplets[triplet_id]
        order = self.served[triplet_id][judge]
        return {
            "triplet_id": triplet_id,
            "variants": [triplet.conditions[c] for c in order],
        }

    def submit_ranking(self, sub: RankingSubmission) -> None:
        with self._lock:
            if sub.triplet_id not in self.triplets:
                raise AnnotationError(f"unknown triplet {sub.triplet_id!r}", status=404)
            if sub.judge not in self.served[sub.triplet_id]:
                raise AnnotationError("triplet was not served to this judge", status=409)
            if (sub.triplet_id, sub.judge) in self.rankings:
                raise AnnotationError("duplicate submission", status=409)
            self._commit(
                {
                    "kind": "submit_ranking",
                    "triplet_id": sub.triplet_id,
                    "judge": sub.judge,
                    "ranks": list(sub.ranks),
                    "at": self._now(),
                }
            )

    # -- export ----------------------------------------------------------------

    def export_edits(self) -> list[str]:
        """Edited paragraphs in the corpus JSONL schema, deterministically
        ordered by (paragraph_id, session)."""
        with self._lock:
            keys = sorted(set(self.edits) | set(self.scores))
            sessions_per_paragraph: dict[str, int] = {}
            for pid, session in keys:
                sessions_per_paragraph[pid] = sessions_per_paragraph.get(pid, 0) + 1
            lines = []
            for pid, session in keys:
                record = self.paragraphs[pid]
                rid = pid if sessions_per_paragraph[pid] == 1 else f"{pid}::{session}"
                annotated = AnnotatedParagraph(
                    record=ParagraphRecord(
                        id=rid,
                        genre=record.genre,
                        venue=record.venue,
                        seed_paragraph=record.seed_paragraph,
                        instruction=record.instruction,
                        generator=record.generator,
                        response=record.response,
                        split=record.split,
                    ),
                    edits=tuple(self.edits.get((pid, session), ())),
                    scores=self.scores.get((pid, session)),
                )
                lines.append(dumps_record(annotated))
            return lines

    def export_rankings(self) -> list[str]:
        """De-shuffled preference judgments, ordered by (triplet_id, judge)."""
        with self._lock:
            lines = []
            for (tid, judge), ranks in sorted(self.rankings.items()):
                order = self.served[tid][judge]
                judgment = PreferenceJudgment(
                    triplet_id=tid,
                    judge=judge,
                    condition_of_rank={ranks[i]: order[i] for i in range(3)},
                    display_order=tuple(order),
                )
                lines.append(json.dumps(judgment.to_json(), ensure_ascii=False))
            return lines

    def export(self, scope: str) -> str:
        if scope == "edits":
            lines = self.export_edits()
        elif scope == "rankings":
            lines = self.export_rankings()
        else:
            raise AnnotationError(f"unknown export scope {scope!r}")
        return "".join(line + "\n" for line in lines)


class _EditBody(_pydantic.BaseModel):
    session: str
    paragraph_id: str
    start: int
    end: int
    original: str
    replacement: str
    category: "str | dict"


class _UndoBody(_pydantic.BaseModel):
    session: str
    paragraph_id: str


class _ScoresBody(_pydantic.BaseModel):
    session: str
    paragraph_id: str
    iwqs: int
    fwqs: int


class _RankBody(_pydantic.BaseModel):
    judge: str
    triplet_id: str
    ranks: list[int]


def create_app(service: AnnotationService, static_dir: str | Path | None = None):
    """Wrap the service in a FastAPI app exposing the JSON endpoints."""
    from fastapi import FastAPI, HTTPException, Query
    from fastapi.responses import PlainTextResponse

    app = FastAPI(title="annotation service")

    def guard(fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except AnnotationError as exc:
            raise HTTPException(status_code=exc.status, detail=str(exc))
        except CorpusError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.get("/api/tasks/next")
    def tasks_next(annotator: str = Query(...)):
        record = guard(service.next_task, annotator)
        return {"paragraph": record.to_json() if record else None}

    @app.post("/api/edits")
    def post_edit(body: _EditBody):
        category = guard(EditCategory.from_json, body.category)
        seq = guard(
            service.submit_edit,
            body.session,
            body.paragraph_id,
            body.start,
            body.end,
            body.original,
            body.replacement,
            category,
        )
        return {"seq": seq}

    @app.post("/api/edits/undo")
    def post_undo(body: _UndoBody):
        seq = guard(service.undo, body.session, body.paragraph_id)
        return {"seq": seq}

    @app.post("/api/scores")
    def post_scores(body: _ScoresBody):
        seq = guard(service.submit_scores, body.session, body.paragraph_id, body.iwqs, body.fwqs)
        return {"seq": seq}

    @app.get("/api/preference/next")
    def preference_next(judge: str = Query(...)):
        view = guard(service.next_triplet, judge)
        return {"triplet": view}

    @app.post("/api/preference/rank")
    def preference_rank(body: _RankBody):
        if len(body.ranks) != 3:
            raise HTTPException(status_code=400, detail="ranks must have 3 entries")
        sub = guard(
            RankingSubmission, triplet_id=body.triplet_id, judge=body.judge,
            ranks=tuple(body.ranks),
        )
        guard(service.submit_ranking, sub)
        return {"ok": True}

    @app.get("/api/export", response_class=PlainTextResponse)
    def export(scope: str = Query(...)):
        return guard(service.export, scope)

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
