"""Annotation collection service with a small JSON-over-HTTP API.

The service hands each annotator the open task closest to resolution that
they have not yet answered, accepts records idempotently, and persists
every accepted record to an append-only JSONL store that is replayed on
startup. The HTTP layer is a stdlib ThreadingHTTPServer; all state changes
go through one lock, so concurrent submissions cannot double-count.

Routes:
    GET  /tasks/next?annotator=ID   next open task for this annotator
    POST /records                   submit one annotation record
    GET  /progress                  aggregate counts
    GET  /...                       static assets (when a directory is given)
"""

from __future__ import annotations

import json
import logging
import mimetypes
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Mapping, Sequence
from urllib.parse import parse_qs, urlparse

from .annotation import (
    DEFAULT_ANNOTATOR_CAP,
    DEFAULT_MIN_ANNOTATORS,
    RESOLVED,
    SCHEMA_VERSION,
    AnnotationRecord,
    AnnotationTask,
    Resolution,
    resolve_task,
)

log = logging.getLogger(__name__)


class AnnotationError(Exception):
    http_status = 400


class UnknownTaskError(AnnotationError):
    http_status = 404


class InvalidChoiceError(AnnotationError):
    http_status = 400


class ClosedTaskError(AnnotationError):
    """Task already resolved or at the annotator cap."""
    http_status = 409


class ConflictingRecordError(AnnotationError):
    """Same annotator, same task, different choice."""
    http_status = 409


class AnnotationService:
    def __init__(
        self,
        tasks: Sequence[AnnotationTask],
        min_annotators: int = DEFAULT_MIN_ANNOTATORS,
        cap: int = DEFAULT_ANNOTATOR_CAP,
        store_path: str | Path | None = None,
    ):
        if min_annotators < 1 or cap < min_annotators:
            raise ValueError("need 1 <= min_annotators <= cap")
        self.tasks: dict[str, AnnotationTask] = {}
        for task in tasks:
            if task.task_id in self.tasks:
                raise ValueError(f"duplicate task id {task.task_id!r}")
            self.tasks[task.task_id] = task
        self.min_annotators = min_annotators
        self.cap = cap
        self._lock = threading.Lock()
        self._records: dict[str, list[AnnotationRecord]] = {t: [] for t in self.tasks}
        self._resolutions: dict[str, Resolution] = {
            t: resolve_task(t, [], min_annotators) for t in self.tasks
        }
        self._store_path = Path(store_path) if store_path is not None else None
        self._store_fh = None
        if self._store_path is not None:
            self._replay_store()
            self._store_path.parent.mkdir(parents=True, exist_ok=True)
            self._store_fh = open(self._store_path, "a", encoding="utf-8")

    # -- persistence --------------------------------------------------------

    def _replay_store(self) -> None:
        if not self._store_path.exists():
            return
        with open(self._store_path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                obj = json.loads(line)
                rec = AnnotationRecord(
                    task_id=obj["task_id"],
                    annotator=obj["annotator"],
                    choice=obj["choice"],
                    token=obj.get("token"),
                )
                try:
                    self._apply(rec)
                except AnnotationError as exc:
                    raise ValueError(
                        f"{self._store_path}:{line_no}: stored record is invalid: {exc}"
                    ) from exc

    def _append_store(self, rec: AnnotationRecord) -> None:
        if self._store_fh is None:
            return
        self._store_fh.write(json.dumps({
            "schema_version": SCHEMA_VERSION,
            "task_id": rec.task_id,
            "annotator": rec.annotator,
            "choice": rec.choice,
            "token": rec.token,
        }, sort_keys=True) + "\n")
        self._store_fh.flush()

    def close(self) -> None:
        if self._store_fh is not None:
            self._store_fh.close()
            self._store_fh = None

    # -- core operations ----------------------------------------------------

    def _apply(self, rec: AnnotationRecord) -> tuple[AnnotationRecord, bool]:
        """Validate and apply one record; caller holds the lock (or is init)."""
        task = self.tasks.get(rec.task_id)
        if task is None:
            raise UnknownTaskError(f"unknown task {rec.task_id!r}")
        if rec.choice not in task.valid_choices():
            raise InvalidChoiceError(
                f"choice {rec.choice!r} not offered for task {rec.task_id!r}"
            )
        for prior in self._records[rec.task_id]:
            if prior.annotator == rec.annotator:
                if prior.choice == rec.choice:
                    return prior, False
                raise ConflictingRecordError(
                    f"annotator {rec.annotator!r} already answered "
                    f"{rec.task_id!r} with {prior.choice!r}"
                )
        res = self._resolutions[rec.task_id]
        if not res.is_open(self.cap):
            raise ClosedTaskError(f"task {rec.task_id!r} is closed")
        self._records[rec.task_id].append(rec)
        self._resolutions[rec.task_id] = resolve_task(
            rec.task_id, self._records[rec.task_id], self.min_annotators
        )
        return rec, True

    def submit(self, rec: AnnotationRecord) -> tuple[AnnotationRecord, bool]:
        """Apply a record; returns (record, created). Idempotent on exact repeats."""
        with self._lock:
            applied, created = self._apply(rec)
            if created:
                self._append_store(applied)
            return applied, created

    def next_task(self, annotator: str) -> AnnotationTask | None:
        """The open task nearest resolution that this annotator hasn't answered."""
        with self._lock:
            best_key = None
            best = None
            for tid, res in self._resolutions.items():
                if not res.is_open(self.cap):
                    continue
                if any(r.annotator == annotator for r in self._records[tid]):
                    continue
                key = (-res.n_records, tid)
                if best_key is None or key < best_key:
                    best_key = key
                    best = self.tasks[tid]
            return best

    def resolutions(self) -> dict[str, Resolution]:
        with self._lock:
            return dict(self._resolutions)

    def records(self) -> list[AnnotationRecord]:
        with self._lock:
            return [r for tid in sorted(self._records) for r in self._records[tid]]

    def progress(self) -> dict:
        with self._lock:
            total = len(self.tasks)
            resolved = sum(1 for r in self._resolutions.values() if r.status == RESOLVED)
            open_tasks = sum(1 for r in self._resolutions.values() if r.is_open(self.cap))
            n_records = sum(len(v) for v in self._records.values())
            return {
                "schema_version": SCHEMA_VERSION,
                "tasks": total,
                "resolved": resolved,
                "open": open_tasks,
                "exhausted": total - resolved - open_tasks,
                "records": n_records,
            }


# ---------------------------------------------------------------------------
# HTTP layer
# ---------------------------------------------------------------------------

def _task_payload(task: AnnotationTask | None) -> dict:
    if task is None:
        return {"schema_version": SCHEMA_VERSION, "task": None}
    return {
        "schema_version": SCHEMA_VERSION,
        "task": {
            "task_id": task.task_id,
            "segment_id": task.segment_id,
            "station": task.station,
            "text": task.text,
            "candidates": list(task.candidates),
        },
    }


def make_handler(service: AnnotationService, static_dir: str | Path | None = None):
    static_root = Path(static_dir).resolve() if static_dir is not None else None

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # route through logging, not stderr
            log.debug("%s %s", self.address_string(), fmt % args)

        def _send_json(self, status: int, payload: dict) -> None:
            body = json.dumps(payload, sort_keys=True).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _send_static(self, rel: str) -> None:
            if static_root is None:
                self._send_json(404, {"error": "no such route"})
                return
            target = (static_root / rel.lstrip("/")).resolve()
            if target.is_dir():
                target = target / "index.html"
            if static_root not in target.parents and target != static_root:
                self._send_json(404, {"error": "no such route"})
                return
            if not target.is_file():
                self._send_json(404, {"error": "no such route"})
                return
            ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
            body = target.read_bytes()
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            url = urlparse(self.path)
            if url.path == "/tasks/next":
                params = parse_qs(url.query)
                annotator = params.get("annotator", [""])[0].strip()
                if not annotator:
                    self._send_json(400, {"error": "annotator query parameter required"})
                    return
                self._send_json(200, _task_payload(service.next_task(annotator)))
            elif url.path == "/progress":
                self._send_json(200, service.progress())
            elif url.path == "/":
                self._send_static("index.html")
            else:
                self._send_static(url.path)

        def do_POST(self):
            url = urlparse(self.path)
            if url.path != "/records":
                self._send_json(404, {"error": "no such route"})
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
                obj = json.loads(self.rfile.read(length))
                rec = AnnotationRecord(
                    task_id=str(obj["task_id"]),
                    annotator=str(obj["annotator"]),
                    choice=str(obj["choice"]),
                    token=str(obj["token"]) if obj.get("token") is not None else None,
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                self._send_json(400, {"error": f"bad record payload: {exc}"})
                return
            try:
                applied, created = service.submit(rec)
            except AnnotationError as exc:
                self._send_json(exc.http_status, {"error": str(exc)})
                return
            self._send_json(201 if created else 200, {
                "schema_version": SCHEMA_VERSION,
                "created": created,
                "record": {
                    "task_id": applied.task_id,
                    "annotator": applied.annotator,
                    "choice": applied.choice,
                    "token": applied.token,
                },
            })

    return Handler


def make_server(
    service: AnnotationService,
    host: str = "127.0.0.1",
    port: int = 8765,
    static_dir: str | Path | None = None,
) -> ThreadingHTTPServer:
    return ThreadingHTTPServer((host, port), make_handler(service, static_dir))
