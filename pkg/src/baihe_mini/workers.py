"""Model registry, background worker lifecycle, and the inference protocol.

A worker is any executable that speaks protocol v1 on its standard streams:
newline-delimited JSON objects, one per line, no line over 1 MiB. The worker
prints a handshake line at startup, then answers requests; the engine sends
one request at a time per worker and treats every transport fault (timeout,
crash, garbage) as a counted fallback, never a query failure.
"""

from __future__ import annotations

import itertools
import json
import logging
import os
import queue
import subprocess
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from .catalog import Catalog, ColumnDef
from .errors import (
    AlreadyRunningError,
    BadManifestError,
    DuplicateModelError,
    HandshakeTimeoutError,
    SpawnError,
    TaskMismatchError,
    TransportError,
    UnknownModelError,
)
from .hooks import (
    HookOutcome,
    HookProvider,
    cardest_payload,
    cost_payload,
    valid_cost,
    valid_selectivity,
)

log = logging.getLogger(__name__)

TASKS = ("CARDEST", "COST", "RUNTIME", "STEER")
PROTOCOL_VERSION = 1
MAX_LINE_BYTES = 1024 * 1024

SESSION_VAR_BY_TASK = {
    "CARDEST": "baihe_ce_model",
    "COST": "baihe_cost_model",
    "STEER": "baihe_steer_model",
    "RUNTIME": "baihe_runtime_model",
}

# per-model accounting table: one row per inference event
STATS_COLUMNS = (
    ColumnDef("ts", "float64"),
    ColumnDef("event", "text"),
    ColumnDef("latency_ms", "float64"),
)

_GRACE_SHUTDOWN_S = 0.5


def load_manifest(model_dir: str | Path) -> dict:
    """Read and validate `manifest` in a model directory."""
    model_dir = Path(model_dir)
    path = model_dir / "manifest"
    if not path.is_file():
        raise BadManifestError(f"no manifest file in {model_dir}")
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise BadManifestError(f"manifest does not parse: {exc}") from None
    for key in ("name", "task", "entry", "protocol_version"):
        if key not in manifest:
            raise BadManifestError(f"manifest is missing {key!r}")
    if manifest["protocol_version"] != PROTOCOL_VERSION:
        raise BadManifestError(
            f"unsupported protocol_version {manifest['protocol_version']!r}"
        )
    if manifest["task"] not in TASKS:
        raise BadManifestError(f"unknown task {manifest['task']!r}")
    entry = model_dir / manifest["entry"]
    if not entry.is_file() or not os.access(entry, os.X_OK):
        raise BadManifestError(f"entry {manifest['entry']!r} is missing or not executable")
    return manifest


class WorkerHandle:
    """A live worker process with a reader thread feeding a message queue."""

    def __init__(self, process: subprocess.Popen, log_file):
        self.process = process
        self.log_file = log_file
        self.messages: queue.Queue = queue.Queue()
        self.lock = threading.Lock()  # single in-flight request
        self.reader = threading.Thread(
            target=_read_lines, args=(process.stdout, self.messages), daemon=True
        )
        self.reader.start()

    @property
    def pid(self) -> int:
        return self.process.pid

    def send(self, obj: dict) -> None:
        data = (json.dumps(obj) + "\n").encode("utf-8")
        self.process.stdin.write(data)
        self.process.stdin.flush()

    def terminate(self) -> None:
        if self.process.poll() is None:
            try:
                self.send({"shutdown": True})
            except (OSError, ValueError):
                pass
            try:
                self.process.wait(timeout=_GRACE_SHUTDOWN_S)
            except subprocess.TimeoutExpired:
                self.process.kill()
                self.process.wait(timeout=_GRACE_SHUTDOWN_S)
        for stream in (self.process.stdin, self.process.stdout):
            try:
                if stream:
                    stream.close()
            except OSError:
                pass
        try:
            self.log_file.close()
        except OSError:
            pass


def _read_lines(stdout, messages: queue.Queue) -> None:
    """Reader loop; classifies each frame so infer() never blocks on a pipe."""
    while True:
        try:
            line = stdout.readline(MAX_LINE_BYTES + 1)
        except (OSError, ValueError):
            messages.put(("eof", None))
            return
        if not line:
            messages.put(("eof", None))
            return
        if not line.endswith(b"\n"):
            if len(line) > MAX_LINE_BYTES:
                # drain the remainder of the oversize frame
                while True:
                    rest = stdout.readline(MAX_LINE_BYTES + 1)
                    if not rest or rest.endswith(b"\n"):
                        break
                messages.put(("oversize", None))
                continue
            messages.put(("garbled", line))
            continue
        if len(line) - 1 > MAX_LINE_BYTES:
            messages.put(("oversize", None))
            continue
        try:
            messages.put(("msg", json.loads(line)))
        except (UnicodeDecodeError, json.JSONDecodeError):
            messages.put(("garbled", line))


@dataclass
class ModelEntry:
    name: str
    task: str
    table_scope: frozenset[str]
    stats_table: str
    model_dir: Path
    manifest: dict
    state: str = "registered"  # registered | running | stopped | failed
    handle: WorkerHandle | None = None
    request_count: int = 0
    fallback_count: int = 0
    total_latency_ms: float = 0.0

    @property
    def mean_latency_ms(self) -> float:
        return self.total_latency_ms / self.request_count if self.request_count else 0.0


class ModelRegistry:
    """Owns every worker process; sessions only submit infer() calls."""

    def __init__(
        self,
        catalog: Catalog,
        data_dir: str | Path,
        startup_timeout_ms: int = 2000,
    ):
        self.catalog = catalog
        self.logs_dir = Path(data_dir) / "logs"
        self.logs_dir.mkdir(parents=True, exist_ok=True)
        self.startup_timeout_ms = startup_timeout_ms
        self.entries: dict[str, ModelEntry] = {}
        self._ids = itertools.count(1)
        self._reaper: threading.Thread | None = None
        self._closed = threading.Event()

    # --- lifecycle -------------------------------------------------------------

    def register_model(
        self,
        name: str,
        task: str,
        table_scope,
        stats_table: str,
        model_dir: str | Path,
    ) -> ModelEntry:
        if name in self.entries:
            raise DuplicateModelError(f"model {name!r} already registered")
        task = task.upper()
        if task not in TASKS:
            raise TaskMismatchError(f"unknown task {task!r}")
        manifest = load_manifest(model_dir)
        if manifest["task"] != task:
            raise TaskMismatchError(
                f"manifest declares task {manifest['task']!r}, registered as {task!r}"
            )
        stats_table = stats_table.lower()
        if not self.catalog.has_table(stats_table):
            self.catalog.create_table(stats_table, STATS_COLUMNS)
        entry = ModelEntry(
            name=name,
            task=task,
            table_scope=frozenset(t.lower() for t in table_scope),
            stats_table=stats_table,
            model_dir=Path(model_dir),
            manifest=manifest,
        )
        self.entries[name] = entry
        return entry

    def get(self, name: str) -> ModelEntry:
        entry = self.entries.get(name)
        if entry is None:
            raise UnknownModelError(f"model {name!r} is not registered")
        return entry

    def start_model(self, name: str) -> WorkerHandle:
        entry = self.get(name)
        if entry.state == "running":
            raise AlreadyRunningError(f"model {name!r} already has a worker")
        entry_path = entry.model_dir / entry.manifest["entry"]
        log_file = open(self.logs_dir / f"{entry.name}.log", "ab")
        try:
            process = subprocess.Popen(
                [str(entry_path)],
                cwd=str(entry.model_dir),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=log_file,
            )
        except OSError as exc:
            log_file.close()
            entry.state = "failed"
            raise SpawnError(f"cannot spawn {entry_path}: {exc}") from None
        handle = WorkerHandle(process, log_file)
        try:
            self._await_handshake(entry, handle)
        except (SpawnError, HandshakeTimeoutError):
            entry.state = "failed"
            handle.terminate()
            raise
        entry.handle = handle
        entry.state = "running"
        self._ensure_reaper()
        return handle

    def _await_handshake(self, entry: ModelEntry, handle: WorkerHandle) -> None:
        deadline = time.monotonic() + self.startup_timeout_ms / 1000.0
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise HandshakeTimeoutError(
                    f"worker for {entry.name!r} sent no handshake within "
                    f"{self.startup_timeout_ms} ms"
                )
            try:
                kind, obj = handle.messages.get(timeout=remaining)
            except queue.Empty:
                continue
            if kind == "eof":
                code = handle.process.poll()
                raise SpawnError(f"worker for {entry.name!r} exited (code {code})")
            if kind != "msg":
                raise SpawnError(f"worker for {entry.name!r} sent an invalid handshake")
            if obj.get("protocol_version") != PROTOCOL_VERSION:
                raise SpawnError(
                    f"worker for {entry.name!r} speaks protocol "
                    f"{obj.get('protocol_version')!r}, need {PROTOCOL_VERSION}"
                )
            tasks = obj.get("tasks")
            if not isinstance(tasks, list) or entry.task not in tasks:
                raise SpawnError(
                    f"worker for {entry.name!r} does not serve task {entry.task}"
                )
            return

    def reset_model(self, name: str) -> None:
        """Stop the worker if running; idempotent. Queries fall back to the
        builtin estimators afterwards."""
        entry = self.get(name)
        if entry.handle is not None:
            entry.handle.terminate()
            entry.handle = None
        entry.state = "stopped"

    # --- inference -------------------------------------------------------------

    def infer(self, name: str, payload: dict, deadline_ms: int) -> dict:
        entry = self.get(name)
        started = time.perf_counter()
        try:
            result = self._infer_raw(entry, payload, deadline_ms)
        except TransportError as exc:
            entry.fallback_count += 1
            self._stats_row(entry, exc.kind, (time.perf_counter() - started) * 1000.0)
            raise
        latency_ms = (time.perf_counter() - started) * 1000.0
        entry.request_count += 1
        entry.total_latency_ms += latency_ms
        self._stats_row(entry, "ok", latency_ms)
        return result

    def _infer_raw(self, entry: ModelEntry, payload: dict, deadline_ms: int) -> dict:
        if entry.state != "running" or entry.handle is None:
            raise TransportError("crashed", f"model {entry.name!r} has no running worker")
        handle = entry.handle
        if not handle.lock.acquire(blocking=False):
            raise TransportError("protocol", "a request is already in flight")
        try:
            request_id = next(self._ids)
            request = {
                "id": request_id,
                "task": entry.task,
                "deadline_ms": deadline_ms,
                "payload": payload,
            }
            try:
                handle.send(request)
            except (OSError, ValueError) as exc:
                self._mark_failed(entry)
                raise TransportError("crashed", f"write failed: {exc}") from None
            deadline = time.monotonic() + deadline_ms / 1000.0
            while True:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    # the late response, if any, is discarded when it arrives
                    raise TransportError(
                        "timeout", f"no response within {deadline_ms} ms"
                    )
                try:
                    kind, obj = handle.messages.get(timeout=remaining)
                except queue.Empty:
                    raise TransportError(
                        "timeout", f"no response within {deadline_ms} ms"
                    ) from None
                if kind == "eof":
                    self._mark_failed(entry)
                    raise TransportError("crashed", "worker closed its channel")
                if kind == "oversize":
                    raise TransportError("protocol", "frame exceeds 1 MiB")
                if kind == "garbled":
                    raise TransportError("protocol", "frame is not valid JSON")
                if obj.get("id") != request_id:
                    continue  # stale or bogus id: discard silently
                if obj.get("ok") is True:
                    result = obj.get("result")
                    if not isinstance(result, dict):
                        raise TransportError("protocol", "response carries no result")
                    return result
                if obj.get("ok") is False:
                    raise TransportError("model", str(obj.get("error", "model error")))
                raise TransportError("protocol", "response missing ok field")
        finally:
            handle.lock.release()

    def _mark_failed(self, entry: ModelEntry) -> None:
        entry.state = "failed"

    def note_rejected(self, entry: ModelEntry, reason: str) -> None:
        entry.fallback_count += 1
        self._stats_row(entry, "rejected", 0.0)

    def _stats_row(self, entry: ModelEntry, event: str, latency_ms: float) -> None:
        try:
            self.catalog.insert_rows(
                entry.stats_table, [(time.time(), event, latency_ms)]
            )
        except Exception:
            log.exception("failed to record stats for model %s", entry.name)

    # --- routing ---------------------------------------------------------------

    def route(self, session, task: str, query_tables) -> ModelEntry | None:
        """The model the session names for this task, iff it is running and
        the query's tables all fall inside its scope."""
        name = session.model_vars.get(SESSION_VAR_BY_TASK[task])
        if not name:
            return None
        entry = self.entries.get(name)
        if entry is None or entry.task != task or entry.state != "running":
            return None
        if not frozenset(t.lower() for t in query_tables) <= entry.table_scope:
            return None
        return entry

    # --- housekeeping ------------------------------------------------------------

    def _ensure_reaper(self) -> None:
        if self._reaper is None or not self._reaper.is_alive():
            self._reaper = threading.Thread(target=self._reap_loop, daemon=True)
            self._reaper.start()

    def _reap_loop(self) -> None:
        while not self._closed.wait(0.25):
            for entry in list(self.entries.values()):
                if (
                    entry.state == "running"
                    and entry.handle is not None
                    and entry.handle.process.poll() is not None
                ):
                    entry.state = "failed"

    def close(self) -> None:
        self._closed.set()
        for entry in list(self.entries.values()):
            if entry.handle is not None:
                entry.handle.terminate()
                entry.handle = None
                if entry.state == "running":
                    entry.state = "stopped"


class WorkerHookProvider(HookProvider):
    """Bridges planner hooks to the routed model workers for one query."""

    def __init__(self, registry: ModelRegistry, session, query_tables):
        self.registry = registry
        self.session = session
        self.query_tables = tuple(query_tables)
        self._routed: dict[str, ModelEntry] = {}

    def _call(self, task: str, payload: dict):
        entry = self.registry.route(self.session, task, self.query_tables)
        if entry is None:
            return None, None
        self._routed[task] = entry
        try:
            result = self.registry.infer(
                entry.name, payload, self.session.worker_timeout_ms
            )
        except TransportError as exc:
            self.session.note_fallback(task, str(exc))
            return entry, exc
        return entry, result

    def _rejected(self, entry: ModelEntry, task: str, reason: str) -> HookOutcome:
        self.session.note_fallback(task, reason)
        self.registry.note_rejected(entry, reason)
        return HookOutcome.fallback(reason)

    def note_rejected(self, task: str, reason: str) -> None:
        # semantic rejection decided by the planner; session already counted
        entry = self._routed.get(task)
        if entry is not None:
            self.registry.note_rejected(entry, reason)

    def _cardest(self, payload: dict) -> HookOutcome:
        entry, result = self._call("CARDEST", payload)
        if entry is None:
            return HookOutcome.fallback("no model")
        if isinstance(result, TransportError):
            return HookOutcome.fallback(str(result))
        selectivity = result.get("selectivity")
        if not valid_selectivity(selectivity):
            return self._rejected(
                entry, "CARDEST", f"selectivity {selectivity!r} rejected"
            )
        return HookOutcome.value(float(selectivity))

    def table_selectivity(self, table, filters):
        return self._cardest(cardest_payload([table], filters))

    def join_selectivity(self, tables, predicates):
        return self._cardest(cardest_payload(tables, predicates))

    def node_cost(self, node_type, features):
        entry, result = self._call("COST", cost_payload(node_type, features))
        if entry is None:
            return HookOutcome.fallback("no model")
        if isinstance(result, TransportError):
            return HookOutcome.fallback(str(result))
        cost = result.get("cost")
        if not valid_cost(cost):
            return self._rejected(entry, "COST", f"cost {cost!r} rejected")
        return HookOutcome.value(float(cost))

    def steer(self, query, candidates):
        payload = {"query": query, "candidates": candidates}
        entry, result = self._call("STEER", payload)
        if entry is None:
            return HookOutcome.fallback("no model")
        if isinstance(result, TransportError):
            return HookOutcome.fallback(str(result))
        if not isinstance(result, dict) or (
            "choice" not in result and "plan_directive" not in result
        ):
            return self._rejected(entry, "STEER", "malformed steering result")
        return HookOutcome.value(result)

    def predict_latency(self, plan_wire: dict):
        """RUNTIME-task inference; surfaced only as an EXPLAIN annotation."""
        entry, result = self._call("RUNTIME", {"plan": plan_wire})
        if entry is None:
            return None
        if isinstance(result, TransportError):
            return None
        latency = result.get("latency_ms")
        if not valid_cost(latency):
            self._rejected(entry, "RUNTIME", f"latency {latency!r} rejected")
            return None
        return float(latency)
