"""Versioned, filter-scoped capture of executed queries for model training.

A collector matches queries by class and table set. While running it buffers
one JSON record per matching query; past the buffer cap the oldest records
spill to disk so nothing is lost. Stopping flushes everything to
`<data_dir>/datasets/<dataset_id>.v<version>.jsonl` and to rows of the
collector's target table, where they stay queryable through SQL.
"""

from __future__ import annotations

import json
import logging
import re
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

from .catalog import Catalog, ColumnDef
from .errors import (
    AlreadyRunningError,
    AmbiguousDatasetError,
    DuplicateCollectorError,
    EmptyFilterError,
    UnknownCollectorError,
    UnknownDatasetError,
)
from .executor import ExecutionReport
from .plannodes import plan_to_wire
from .sqlast import QueryAst

log = logging.getLogger(__name__)

FEATURES = ("query_text", "plan", "est_costs", "actual_runtimes")

DATASET_SCHEMA_VERSION = 1

# schema of auto-created target tables; `record` holds the full JSON line
TARGET_COLUMNS = (
    ColumnDef("dataset_id", "text"),
    ColumnDef("version", "int64"),
    ColumnDef("ts", "float64"),
    ColumnDef("query_class", "text"),
    ColumnDef("query_text", "text"),
    ColumnDef("record", "text"),
)


@dataclass(frozen=True)
class CollectorDef:
    name: str
    table_filter: frozenset[str]
    class_filter: frozenset[str]
    features: frozenset[str]


@dataclass
class CollectorState:
    definition: CollectorDef
    status: str = "defined"  # defined | running | stopped
    dataset_id: str = ""
    version: int = 0
    target_table: str = ""
    buffer: deque = field(default_factory=deque)
    spill_path: Path | None = None
    spilled: int = 0


def matches(collector: CollectorDef, ast: QueryAst) -> bool:
    """True iff the query's class is collected and its tables all fall
    inside the collector's table filter."""
    if ast.query_class.value not in collector.class_filter:
        return False
    return set(ast.tables) <= collector.table_filter


class DataCollection:
    def __init__(self, catalog: Catalog, data_dir: Path, buffer_cap: int = 10_000):
        self.catalog = catalog
        self.datasets_dir = Path(data_dir) / "datasets"
        self.datasets_dir.mkdir(parents=True, exist_ok=True)
        self.buffer_cap = buffer_cap
        self.collectors: dict[str, CollectorState] = {}
        self._versions: dict[tuple[str, str], int] = {}

    # --- lifecycle -----------------------------------------------------------

    def define_collector(
        self,
        name: str,
        table_filter,
        class_filter,
        features=None,
    ) -> CollectorDef:
        if name in self.collectors:
            raise DuplicateCollectorError(f"collector {name!r} already exists")
        tables = frozenset(t.lower() for t in table_filter)
        classes = frozenset(c.upper() for c in class_filter)
        if not tables or not classes:
            raise EmptyFilterError("collector filters must be non-empty")
        feats = frozenset(features) if features is not None else frozenset(FEATURES)
        unknown = feats - set(FEATURES)
        if unknown:
            raise EmptyFilterError(f"unknown collector features {sorted(unknown)}")
        definition = CollectorDef(name, tables, classes, feats)
        self.collectors[name] = CollectorState(definition)
        return definition

    def _disk_version(self, dataset_id: str) -> int:
        best = 0
        pattern = re.compile(re.escape(dataset_id) + r"\.v(\d+)\.jsonl$")
        for path in self.datasets_dir.glob(f"{dataset_id}.v*.jsonl"):
            m = pattern.match(path.name)
            if m:
                best = max(best, int(m.group(1)))
        return best

    def start_collector(self, name: str, dataset_id: str, target_table: str) -> int:
        state = self.collectors.get(name)
        if state is None:
            raise UnknownCollectorError(f"collector {name!r} is not defined")
        if state.status == "running":
            raise AlreadyRunningError(f"collector {name!r} is already running")
        target_table = target_table.lower()
        if not self.catalog.has_table(target_table):
            self.catalog.create_table(target_table, TARGET_COLUMNS)
        key = (name, dataset_id)
        version = max(self._versions.get(key, 0), self._disk_version(dataset_id)) + 1
        self._versions[key] = version
        state.status = "running"
        state.dataset_id = dataset_id
        state.version = version
        state.target_table = target_table
        state.buffer = deque()
        state.spill_path = self.datasets_dir / f"{dataset_id}.v{version}.jsonl.part"
        state.spilled = 0
        return version

    def capture(self, report: ExecutionReport, ast: QueryAst) -> int:
        """Append one record per running, matching collector. Never raises:
        capture failures are logged and the query proceeds."""
        appended = 0
        for state in self.collectors.values():
            if state.status != "running":
                continue
            try:
                if not matches(state.definition, ast):
                    continue
                line = json.dumps(self._build_record(state, report))
                state.buffer.append(line)
                while len(state.buffer) > self.buffer_cap:
                    oldest = state.buffer.popleft()
                    with open(state.spill_path, "a", encoding="utf-8") as fh:
                        fh.write(oldest + "\n")
                    state.spilled += 1
                appended += 1
            except Exception:
                log.exception("data collector %s failed to capture", state.definition.name)
        return appended

    def stop_collector(self, dataset_id: str) -> int:
        running = [
            s
            for s in self.collectors.values()
            if s.status == "running" and s.dataset_id == dataset_id
        ]
        if not running:
            raise UnknownDatasetError(f"no running collector for dataset {dataset_id!r}")
        if len(running) > 1:
            raise AmbiguousDatasetError(
                f"{len(running)} running collectors share dataset {dataset_id!r}"
            )
        state = running[0]
        final_path = self.datasets_dir / f"{dataset_id}.v{state.version}.jsonl"
        lines: list[str] = []
        if state.spilled and state.spill_path is not None and state.spill_path.exists():
            with open(state.spill_path, encoding="utf-8") as fh:
                lines.extend(line.rstrip("\n") for line in fh)
        lines.extend(state.buffer)
        with open(final_path, "w", encoding="utf-8") as fh:
            for line in lines:
                fh.write(line + "\n")
        if state.spill_path is not None and state.spill_path.exists():
            state.spill_path.unlink()
        rows = []
        for line in lines:
            record = json.loads(line)
            rows.append(
                (
                    record["dataset_id"],
                    record["version"],
                    record["timestamp"],
                    record["query_class"],
                    record.get("query_text"),
                    line,
                )
            )
        self.catalog.insert_rows(state.target_table, rows)
        state.status = "stopped"
        state.buffer = deque()
        flushed = len(lines)
        state.spilled = 0
        return flushed

    # --- records ---------------------------------------------------------------

    def _build_record(self, state: CollectorState, report: ExecutionReport) -> dict:
        feats = state.definition.features
        record: dict = {
            "schema": DATASET_SCHEMA_VERSION,
            "dataset_id": state.dataset_id,
            "version": state.version,
            "timestamp": time.time(),
            "query_class": report.query_class,
            "tables": list(report.tables),
        }
        if "query_text" in feats:
            record["query_text"] = report.query_text
        plan = report.plan
        if plan is not None:
            if "plan" in feats:
                record["plan"] = plan_to_wire(
                    plan, with_node_ids=True, with_quals=True, with_table_rows=True
                )
            want_est = "est_costs" in feats
            want_actual = "actual_runtimes" in feats
            if want_est or want_actual:
                nodes = []
                for node, _ in plan.walk():
                    entry: dict = {"node_id": node.node_id, "node_type": node.node_type}
                    if node.is_scan:
                        entry["table"] = node.table
                    if want_est:
                        entry["est_rows"] = node.est_rows
                        entry["est_cost"] = node.est_cost
                    if want_actual:
                        stats = report.node_stats.get(node.node_id)
                        if stats is not None:
                            entry["actual_rows"] = stats.actual_rows
                            entry["wall_time_ns"] = stats.wall_time_ns
                            entry["loops"] = stats.loops
                    nodes.append(entry)
                record["nodes"] = nodes
            if want_est:
                record["est_cost"] = plan.est_cost
            if want_actual:
                record["total_time_ns"] = report.total_time_ns
                record["result_rows"] = report.result_row_count
        return record
