"""Human annotation tasks: sampling, aggregation, and file exchange.

Weakly labeled segments are sampled per (topic, station) cell for human
review. Each task shows the segment text plus a short candidate topic
list; annotators may also answer "none". A task resolves once enough
annotators agree by strict majority; unresolved tasks are re-queued one
extra annotator at a time up to a cap, after which they are excluded from
ground truth.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import Segment
from .weaksup import WeakLabel

NONE_CHOICE = "none"
DEFAULT_PER_CELL = 50
DEFAULT_CANDIDATES = 3
DEFAULT_MIN_ANNOTATORS = 4
DEFAULT_ANNOTATOR_CAP = 7

SCHEMA_VERSION = 1

RESOLVED = "resolved"
NEEDS_MORE = "needs_more"


@dataclass(frozen=True)
class AnnotationTask:
    task_id: str
    segment_id: str
    station: str
    text: str
    candidates: tuple[str, ...]

    def valid_choices(self) -> frozenset[str]:
        return frozenset(self.candidates) | {NONE_CHOICE}


@dataclass(frozen=True)
class AnnotationRecord:
    task_id: str
    annotator: str
    choice: str
    token: str | None = None


@dataclass(frozen=True)
class Resolution:
    task_id: str
    status: str  # RESOLVED or NEEDS_MORE
    choice: str | None
    n_records: int

    def is_open(self, cap: int = DEFAULT_ANNOTATOR_CAP) -> bool:
        return self.status != RESOLVED and self.n_records < cap


@dataclass(frozen=True)
class GroundTruthLabel:
    segment_id: str
    topic: str  # a topic id, or "none"
    n_records: int


@dataclass(frozen=True)
class RecordIssue:
    line_no: int
    message: str


# ---------------------------------------------------------------------------
# Task sampling
# ---------------------------------------------------------------------------

def candidate_topics(label: WeakLabel, n_candidates: int = DEFAULT_CANDIDATES) -> tuple[str, ...]:
    """Top topics by first-layer score, strongest first, ties by id."""
    ranked = sorted(label.scores, key=lambda z: (-label.scores[z], z))
    return tuple(ranked[:n_candidates])


def sample_tasks(
    weak_labels: Mapping[str, WeakLabel],
    segments: Sequence[Segment],
    topics: Sequence[str],
    stations: Sequence[str],
    per_cell: int = DEFAULT_PER_CELL,
    n_candidates: int = DEFAULT_CANDIDATES,
    seed: int = 0,
) -> list[AnnotationTask]:
    """Sample up to ``per_cell`` weakly labeled segments per (topic, station).

    A segment drawn in several cells (multi-topic segments) yields a single
    task; station cells are disjoint, so per-topic totals are unaffected by
    the dedupe. Task ids equal segment ids, since tasks are one per segment.
    """
    by_id = {s.id: s for s in segments}
    cell_members: dict[tuple[str, str], list[str]] = {}
    for sid in sorted(weak_labels):
        seg = by_id.get(sid)
        if seg is None:
            continue
        for z in weak_labels[sid].topics:
            cell_members.setdefault((z, seg.station), []).append(sid)

    rng = random.Random(seed)
    chosen: set[str] = set()
    for z in sorted(topics):
        for st in sorted(stations):
            members = cell_members.get((z, st), [])
            take = members if len(members) <= per_cell else rng.sample(members, per_cell)
            chosen.update(take)

    tasks = []
    for sid in sorted(chosen):
        seg = by_id[sid]
        tasks.append(AnnotationTask(
            task_id=sid,
            segment_id=sid,
            station=seg.station,
            text=seg.text,
            candidates=candidate_topics(weak_labels[sid], n_candidates),
        ))
    return tasks


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

def resolve_task(
    task_id: str,
    records: Iterable[AnnotationRecord],
    min_annotators: int = DEFAULT_MIN_ANNOTATORS,
) -> Resolution:
    """Strict-majority resolution over one task's records.

    One vote per annotator: exact duplicates collapse, conflicting ones are
    an error (validation upstream never lets them through, so a conflict
    here means corrupted input). A task resolves when at least
    ``min_annotators`` voted and some choice holds more than half the
    votes; ties or thin participation leave it unresolved.
    """
    votes: dict[str, str] = {}
    for rec in records:
        if rec.task_id != task_id:
            raise ValueError(f"record for {rec.task_id!r} passed to task {task_id!r}")
        prior = votes.setdefault(rec.annotator, rec.choice)
        if prior != rec.choice:
            raise ValueError(
                f"annotator {rec.annotator!r} has conflicting records on task {task_id!r}"
            )
    n = len(votes)
    if n >= min_annotators:
        (top, top_count), = Counter(votes.values()).most_common(1)
        if top_count * 2 > n:
            return Resolution(task_id, RESOLVED, top, n)
    return Resolution(task_id, NEEDS_MORE, None, n)


def aggregate_records(
    records: Iterable[AnnotationRecord],
    min_annotators: int = DEFAULT_MIN_ANNOTATORS,
) -> dict[str, Resolution]:
    by_task: dict[str, list[AnnotationRecord]] = {}
    for rec in records:
        by_task.setdefault(rec.task_id, []).append(rec)
    return {
        tid: resolve_task(tid, recs, min_annotators)
        for tid, recs in sorted(by_task.items())
    }


def ground_truth_labels(
    tasks: Mapping[str, AnnotationTask],
    resolutions: Mapping[str, Resolution],
) -> list[GroundTruthLabel]:
    """Resolved tasks only; capped-but-unresolved tasks are dropped."""
    out = []
    for tid in sorted(resolutions):
        res = resolutions[tid]
        if res.status == RESOLVED:
            out.append(GroundTruthLabel(
                segment_id=tasks[tid].segment_id,
                topic=res.choice,
                n_records=res.n_records,
            ))
    return out


# ---------------------------------------------------------------------------
# File exchange
# ---------------------------------------------------------------------------

def export_tasks(path: str | Path, tasks: Sequence[AnnotationTask]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for task in tasks:
            fh.write(json.dumps({
                "schema_version": SCHEMA_VERSION,
                "task_id": task.task_id,
                "segment_id": task.segment_id,
                "station": task.station,
                "text": task.text,
                "candidates": list(task.candidates),
            }, sort_keys=True) + "\n")


def import_tasks(path: str | Path) -> list[AnnotationTask]:
    tasks = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            if obj.get("schema_version") != SCHEMA_VERSION:
                raise ValueError(
                    f"line {line_no}: task schema version {obj.get('schema_version')} "
                    f"!= {SCHEMA_VERSION}"
                )
            tasks.append(AnnotationTask(
                task_id=str(obj["task_id"]),
                segment_id=str(obj["segment_id"]),
                station=str(obj["station"]),
                text=str(obj["text"]),
                candidates=tuple(str(c) for c in obj["candidates"]),
            ))
    return tasks


def import_records(
    path: str | Path,
    tasks: Mapping[str, AnnotationTask],
) -> tuple[list[AnnotationRecord], list[RecordIssue]]:
    """Read annotator records, rejecting invalid rows individually.

    Unknown tasks, choices outside the task's option set, and conflicting
    duplicates from the same annotator are reported; an exact duplicate of
    an accepted record is collapsed silently.
    """
    records: list[AnnotationRecord] = []
    issues: list[RecordIssue] = []
    seen: dict[tuple[str, str], str] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                issues.append(RecordIssue(line_no, f"malformed record: {exc}"))
                continue
            try:
                rec = AnnotationRecord(
                    task_id=str(obj["task_id"]),
                    annotator=str(obj["annotator"]),
                    choice=str(obj["choice"]),
                    token=str(obj["token"]) if obj.get("token") is not None else None,
                )
            except (KeyError, TypeError) as exc:
                issues.append(RecordIssue(line_no, f"missing field: {exc}"))
                continue
            task = tasks.get(rec.task_id)
            if task is None:
                issues.append(RecordIssue(line_no, f"unknown task {rec.task_id!r}"))
                continue
            if rec.choice not in task.valid_choices():
                issues.append(RecordIssue(
                    line_no, f"choice {rec.choice!r} not offered for task {rec.task_id!r}"
                ))
                continue
            key = (rec.task_id, rec.annotator)
            if key in seen:
                if seen[key] != rec.choice:
                    issues.append(RecordIssue(
                        line_no,
                        f"annotator {rec.annotator!r} already answered task "
                        f"{rec.task_id!r} with {seen[key]!r}",
                    ))
                continue
            seen[key] = rec.choice
            records.append(rec)
    return records, issues


def export_ground_truth(path: str | Path, labels: Sequence[GroundTruthLabel]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for lab in labels:
            fh.write(json.dumps({
                "schema_version": SCHEMA_VERSION,
                "segment_id": lab.segment_id,
                "topic": lab.topic,
                "n_records": lab.n_records,
            }, sort_keys=True) + "\n")


def import_ground_truth(path: str | Path) -> list[GroundTruthLabel]:
    labels = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            labels.append(GroundTruthLabel(
                segment_id=str(obj["segment_id"]),
                topic=str(obj["topic"]),
                n_records=int(obj["n_records"]),
            ))
    return labels
