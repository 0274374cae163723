"""HTTP service for expert annotation of text chunks.

Serves open tasks of three kinds — ``quality`` (high/low), ``variant``
(one label from a configured set), and ``pos`` (one tag per token) —
records submitted labels crash-safely, and exports labeled data in the
exact corpus/CoNLL formats the rest of the toolkit reads.

Endpoints (JSON unless noted):

* ``GET /api/tasks/next?kind=quality`` -> ``{"task": {...} | null}``;
  the returned task is leased for a bounded interval so concurrent
  annotators never receive the same task at once.
* ``POST /api/tasks/{id}/label`` with ``{"annotator": "...",
  "label": ...}`` -> 200 ack, 400 on validation problems, 404 for
  unknown tasks, 409 when the task is already labeled.
* ``GET /api/export?kind=...`` -> labeled data as JSON-lines (quality,
  variant) or CoNLL text (pos), sorted by task id.
* ``GET /api/progress`` -> per-kind and total counts.

Labels are appended to ``labels.log`` (one fsynced JSON line per
submit) with a compacted snapshot every ``snapshot_every`` submits;
startup replays snapshot + log, so every acknowledged submit survives
a crash. Task payloads: quality/variant tasks carry the chunk record;
pos tasks carry ``{"chunk_id", "tokens"}`` (whitespace tokens).
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Sequence
from urllib.parse import parse_qs, unquote, urlparse

from .classify import DEFAULT_VARIANT_LABELS
from .corpus import (
    AnnotatedSentence,
    Corpus,
    chunk_to_dict,
    corpus_to_jsonl,
    relabel,
    tagged_to_conll,
)
from .errors import LimbaError
from .hmm import UNIVERSAL_TAGS

logger = logging.getLogger(__name__)

KINDS = ("quality", "variant", "pos")
QUALITY_LABELS = ("high", "low")


class BadRequest(LimbaError):
    """Maps to HTTP 400."""


class NotFound(LimbaError):
    """Maps to HTTP 404."""


class Conflict(LimbaError):
    """Maps to HTTP 409."""


class _Task:
    __slots__ = ("task_id", "kind", "payload", "label_record", "chunk")

    def __init__(self, task_id, kind, payload, chunk):
        self.task_id = task_id
        self.kind = kind
        self.payload = payload
        self.chunk = chunk
        self.label_record = None

    @property
    def status(self) -> str:
        return "labeled" if self.label_record is not None else "open"

    def view(self) -> dict:
        return {
            "task_id": self.task_id,
            "kind": self.kind,
            "payload": self.payload,
            "status": self.status,
        }


class TaskStore:
    """Tasks, leases, and the crash-safe label log.

    All mutation happens under one lock; reads of exports/progress take
    the same lock briefly to see a consistent label set.
    """

    def __init__(
        self,
        corpus: Corpus,
        state_dir: str | Path,
        variant_labels: Sequence[str] = DEFAULT_VARIANT_LABELS,
        tagset: Sequence[str] = UNIVERSAL_TAGS,
        lease_seconds: float = 600.0,
        snapshot_every: int = 50,
    ):
        self.variant_labels = tuple(variant_labels)
        self.tagset = tuple(tagset)
        self.lease_seconds = lease_seconds
        self.snapshot_every = max(1, snapshot_every)
        self._lock = threading.Lock()
        self._leases: dict = {}  # task_id -> monotonic expiry
        self._submit_count = 0
        self._tasks: dict = {}
        for chunk in corpus:
            record = chunk_to_dict(chunk)
            for kind in ("quality", "variant"):
                task_id = f"{kind}-{chunk.id}"
                self._tasks[task_id] = _Task(task_id, kind, dict(record), chunk)
            task_id = f"pos-{chunk.id}"
            self._tasks[task_id] = _Task(
                task_id, "pos",
                {"chunk_id": chunk.id, "tokens": chunk.text.split()},
                chunk,
            )
        self._order = {
            kind: sorted(t for t in self._tasks if self._tasks[t].kind == kind)
            for kind in KINDS
        }
        self._state_dir = Path(state_dir)
        self._state_dir.mkdir(parents=True, exist_ok=True)
        self._log_path = self._state_dir / "labels.log"
        self._snapshot_path = self._state_dir / "labels.snapshot.json"
        self._replay()
        self._log_fh = open(self._log_path, "a", encoding="utf-8")

    # -- persistence --------------------------------------------------------

    def _replay(self) -> None:
        records = {}
        if self._snapshot_path.exists():
            snapshot = json.loads(self._snapshot_path.read_text(encoding="utf-8"))
            records.update(snapshot.get("labels", {}))
        if self._log_path.exists():
            with open(self._log_path, "r", encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, 1):
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        record = json.loads(line)
                        records[record["task_id"]] = record
                    except (ValueError, KeyError):
                        logger.warning("skipping bad log line %d", lineno)
        restored = 0
        for task_id, record in records.items():
            task = self._tasks.get(task_id)
            if task is None:
                logger.warning("label for unknown task %r ignored", task_id)
                continue
            try:
                self._validate_label(task, record["label"])
            except (BadRequest, KeyError):
                logger.warning("invalid stored label for %r ignored", task_id)
                continue
            task.label_record = record
            restored += 1
        if restored:
            logger.info("restored %d labels from disk", restored)

    def _append_log(self, record: dict) -> None:
        self._log_fh.write(json.dumps(record, ensure_ascii=False) + "\n")
        self._log_fh.flush()
        os.fsync(self._log_fh.fileno())

    def _write_snapshot(self) -> None:
        labels = {
            task.task_id: task.label_record
            for task in self._tasks.values()
            if task.label_record is not None
        }
        tmp = self._snapshot_path.with_suffix(".tmp")
        tmp.write_text(
            json.dumps({"labels": labels}, ensure_ascii=False) + "\n",
            encoding="utf-8")
        os.replace(tmp, self._snapshot_path)

    def close(self) -> None:
        self._log_fh.close()

    # -- task operations ----------------------------------------------------

    def _check_kind(self, kind: str) -> None:
        if kind not in KINDS:
            raise BadRequest(
                f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}")

    def next_task(self, kind: str):
        """First open, unleased task of the kind, leasing it; else None."""
        self._check_kind(kind)
        with self._lock:
            now = time.monotonic()
            for task_id in self._order[kind]:
                task = self._tasks[task_id]
                if task.label_record is not None:
                    continue
                if self._leases.get(task_id, 0.0) > now:
                    continue
                self._leases[task_id] = now + self.lease_seconds
                return task.view()
            return None

    def _validate_label(self, task: _Task, label) -> None:
        if task.kind == "quality":
            if label not in QUALITY_LABELS:
                raise BadRequest(
                    f"quality label must be one of {QUALITY_LABELS}, "
                    f"got {label!r}")
        elif task.kind == "variant":
            if label not in self.variant_labels:
                raise BadRequest(
                    f"variant label must be one of {self.variant_labels}, "
                    f"got {label!r}")
        else:
            tokens = task.payload["tokens"]
            if (not isinstance(label, list)
                    or len(label) != len(tokens)
                    or not all(isinstance(t, str) for t in label)):
                raise BadRequest(
                    f"pos label must be a list of {len(tokens)} tags")
            bad = [t for t in label if t not in self.tagset]
            if bad:
                raise BadRequest(f"unknown tags: {bad}")

    def submit(self, task_id: str, label, annotator: str = "anonymous") -> dict:
        """Persist one label; acknowledged only after the log write."""
        with self._lock:
            task = self._tasks.get(task_id)
            if task is None:
                raise NotFound(f"no task {task_id!r}")
            if task.label_record is not None:
                raise Conflict(f"task {task_id!r} is already labeled")
            self._validate_label(task, label)
            record = {
                "task_id": task_id,
                "annotator": annotator,
                "label": label,
                "submitted_at": datetime.now(timezone.utc).isoformat(),
            }
            self._append_log(record)
            task.label_record = record
            self._leases.pop(task_id, None)
            self._submit_count += 1
            if self._submit_count % self.snapshot_every == 0:
                self._write_snapshot()
            return record

    def export(self, kind: str) -> str:
        """Labeled data of the kind in pipeline format, sorted by task id."""
        self._check_kind(kind)
        with self._lock:
            labeled = [self._tasks[task_id] for task_id in self._order[kind]
                       if self._tasks[task_id].label_record is not None]
            if kind == "pos":
                sentences = [
                    AnnotatedSentence(task.payload["tokens"],
                                      task.label_record["label"])
                    for task in labeled
                ]
                return tagged_to_conll(sentences)
            field = "quality" if kind == "quality" else "variant"
            chunks = [
                relabel(task.chunk, **{field: task.label_record["label"]})
                for task in labeled
            ]
            return corpus_to_jsonl(chunks)

    def progress(self) -> dict:
        with self._lock:
            by_kind = {}
            total = labeled = 0
            for kind in KINDS:
                ids = self._order[kind]
                done = sum(
                    1 for t in ids if self._tasks[t].label_record is not None)
                by_kind[kind] = {"total": len(ids), "labeled": done}
                total += len(ids)
                labeled += done
            return {"total": total, "labeled": labeled, "by_kind": by_kind}


# ---------------------------------------------------------------------------
# HTTP layer
# ---------------------------------------------------------------------------

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json; charset=utf-8",
    ".map": "application/json; charset=utf-8",
    ".svg": "image/svg+xml",
    ".png": "image/png",
    ".ico": "image/x-icon",
}


class _Handler(BaseHTTPRequestHandler):
    store: TaskStore = None  # injected by make_server
    static_dir: Path | None = None

    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # quieter than the stderr default
        logger.debug("%s - %s", self.address_string(), fmt % args)

    def _send(self, status: int, body: bytes, content_type: str) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, status: int, payload) -> None:
        self._send(status, json.dumps(payload, ensure_ascii=False).encode("utf-8"),
                   "application/json; charset=utf-8")

    def _error(self, status: int, message: str) -> None:
        self._send_json(status, {"error": message})

    def do_GET(self):
        parsed = urlparse(self.path)
        query = parse_qs(parsed.query)
        try:
            if parsed.path == "/api/tasks/next":
                kind = query.get("kind", [""])[0]
                task = self.store.next_task(kind)
                self._send_json(200, {"task": task})
            elif parsed.path == "/api/export":
                kind = query.get("kind", [""])[0]
                body = self.store.export(kind).encode("utf-8")
                self._send(200, body, "text/plain; charset=utf-8")
            elif parsed.path == "/api/progress":
                self._send_json(200, self.store.progress())
            else:
                self._serve_static(parsed.path)
        except BadRequest as exc:
            self._error(400, str(exc))

    def do_POST(self):
        parsed = urlparse(self.path)
        if not (parsed.path.startswith("/api/tasks/")
                and parsed.path.endswith("/label")):
            self._error(404, f"no route {parsed.path}")
            return
        task_id = unquote(parsed.path[len("/api/tasks/"):-len("/label")])
        try:
            length = int(self.headers.get("Content-Length", "0"))
            payload = json.loads(self.rfile.read(length) or b"{}")
            if not isinstance(payload, dict) or "label" not in payload:
                raise BadRequest('body must be JSON with a "label" field')
            record = self.store.submit(
                task_id,
                payload["label"],
                annotator=payload.get("annotator", "anonymous"),
            )
            self._send_json(200, {"ok": True, "task_id": task_id,
                                  "submitted_at": record["submitted_at"]})
        except json.JSONDecodeError:
            self._error(400, "request body is not valid JSON")
        except BadRequest as exc:
            self._error(400, str(exc))
        except NotFound as exc:
            self._error(404, str(exc))
        except Conflict as exc:
            self._error(409, str(exc))

    def _serve_static(self, path: str) -> None:
        if self.static_dir is None:
            self._error(404, f"no route {path}")
            return
        relative = path.lstrip("/") or "index.html"
        target = (self.static_dir / relative).resolve()
        root = self.static_dir.resolve()
        if root not in target.parents and target != root:
            self._error(404, "not found")
            return
        if target.is_dir():
            target = target / "index.html"
        if not target.is_file():
            self._error(404, f"no file {relative}")
            return
        content_type = _CONTENT_TYPES.get(target.suffix,
                                          "application/octet-stream")
        self._send(200, target.read_bytes(), content_type)


def make_server(
    store: TaskStore,
    host: str = "127.0.0.1",
    port: int = 8080,
    static_dir: str | Path | None = None,
) -> ThreadingHTTPServer:
    """Build (not start) the HTTP server; call serve_forever() on it."""
    handler = type("BoundHandler", (_Handler,), {
        "store": store,
        "static_dir": Path(static_dir) if static_dir else None,
    })
    return ThreadingHTTPServer((host, port), handler)
