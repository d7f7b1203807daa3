"""Pull-based iterator executor with per-node runtime statistics.

Every node records emitted rows, open count (loops), and inclusive wall
time; the resulting ExecutionReport is what data collectors capture and
what EXPLAIN ANALYZE renders. Hash joins build on the right child; nested
loops rescan the right child once per outer row.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .catalog import Catalog, Table
from .errors import RuntimeTypeError
from .plannodes import PlanNode
from .sqlast import _OP_FUNCS, Predicate


@dataclass(frozen=True)
class NodeRuntimeStats:
    node_id: int
    actual_rows: int  # rows per loop (exact: loops emit uniformly here)
    wall_time_ns: int
    loops: int


@dataclass
class ExecutionReport:
    query_text: str
    plan: PlanNode | None
    node_stats: dict[int, NodeRuntimeStats] = field(default_factory=dict)
    total_time_ns: int = 0
    result_row_count: int = 0
    query_class: str = "SELECT"
    tables: tuple[str, ...] = ()


class _Runtime:
    __slots__ = ("emitted", "opens", "ns")

    def __init__(self):
        self.emitted = 0
        self.opens = 0
        self.ns = 0


class _Iter:
    """Volcano iterator; open() resets state so rescans just reopen."""

    def __init__(self, runtime: _Runtime):
        self.rt = runtime

    def open(self):
        t0 = time.perf_counter_ns()
        self._open()
        self.rt.ns += time.perf_counter_ns() - t0
        self.rt.opens += 1

    def next(self):
        t0 = time.perf_counter_ns()
        row = self._next()
        self.rt.ns += time.perf_counter_ns() - t0
        if row is not None:
            self.rt.emitted += 1
        return row

    def close(self):
        t0 = time.perf_counter_ns()
        self._close()
        self.rt.ns += time.perf_counter_ns() - t0

    def _open(self):
        raise NotImplementedError

    def _next(self):
        raise NotImplementedError

    def _close(self):
        pass


def _compile_filter(table: Table, pred: Predicate):
    idx = table.column_index(pred.column)
    op = _OP_FUNCS[pred.op]
    value = pred.value

    def check(row, _idx=idx, _op=op, _value=value):
        v = row[_idx]
        return v is not None and _op(v, _value)

    return check


class _SeqScan(_Iter):
    def __init__(self, runtime, table: Table, quals):
        super().__init__(runtime)
        self.table = table
        self.checks = [_compile_filter(table, q) for q in quals]
        self.pos = 0

    def _open(self):
        self.pos = 0

    def _next(self):
        rows = self.table.rows
        checks = self.checks
        pos = self.pos
        n = len(rows)
        while pos < n:
            row = rows[pos]
            pos += 1
            ok = True
            for check in checks:
                if not check(row):
                    ok = False
                    break
            if ok:
                self.pos = pos
                return row
        self.pos = pos
        return None


class _IndexScan(_Iter):
    """Equality lookup on the table's primary key, residual quals applied."""

    def __init__(self, runtime, table: Table, quals):
        super().__init__(runtime)
        self.table = table
        self.checks = [_compile_filter(table, q) for q in quals]
        key_qual = next(
            q for q in quals if q.op == "=" and q.column == table.primary_key
        )
        self.key_value = key_qual.value
        self.positions: list[int] = []
        self.pos = 0

    def _open(self):
        self.positions = self.table.pk_lookup(self.key_value)
        self.pos = 0

    def _next(self):
        while self.pos < len(self.positions):
            row = self.table.rows[self.positions[self.pos]]
            self.pos += 1
            if all(check(row) for check in self.checks):
                return row
        return None


def _join_key_indexes(
    quals: tuple[Predicate, ...],
    left_layout: list[str],
    right_layout: list[str],
) -> list[tuple[int, int]]:
    pairs = []
    left_idx = {name: i for i, name in enumerate(left_layout)}
    right_idx = {name: i for i, name in enumerate(right_layout)}
    for q in quals:
        a = f"{q.left_table}.{q.left_column}"
        b = f"{q.right_table}.{q.right_column}"
        if a in left_idx:
            pairs.append((left_idx[a], right_idx[b]))
        else:
            pairs.append((left_idx[b], right_idx[a]))
    return pairs


class _NestLoop(_Iter):
    def __init__(self, runtime, outer: _Iter, inner: _Iter, key_pairs):
        super().__init__(runtime)
        self.outer = outer
        self.inner = inner
        self.key_pairs = key_pairs
        self.cur: tuple | None = None

    def _open(self):
        self.outer.open()
        self.cur = None

    def _next(self):
        while True:
            if self.cur is None:
                self.cur = self.outer.next()
                if self.cur is None:
                    return None
                self.inner.open()
            inner_row = self.inner.next()
            if inner_row is None:
                self.cur = None
                continue
            cur = self.cur
            ok = True
            for li, ri in self.key_pairs:
                lv = cur[li]
                if lv is None or lv != inner_row[ri]:
                    ok = False
                    break
            if ok:
                return cur + inner_row

    def _close(self):
        self.outer.close()
        self.inner.close()


class _HashJoin(_Iter):
    """Builds the hash table on the right child, probes with the left."""

    def __init__(self, runtime, outer: _Iter, inner: _Iter, key_pairs):
        super().__init__(runtime)
        self.outer = outer
        self.inner = inner
        self.outer_keys = [li for li, _ in key_pairs]
        self.inner_keys = [ri for _, ri in key_pairs]
        self.table: dict[tuple, list[tuple]] = {}
        self.cur: tuple | None = None
        self.matches: list[tuple] = []
        self.match_pos = 0

    def _open(self):
        self.table = {}
        self.inner.open()
        while True:
            row = self.inner.next()
            if row is None:
                break
            key = tuple(row[i] for i in self.inner_keys)
            if None in key:
                continue
            self.table.setdefault(key, []).append(row)
        self.outer.open()
        self.cur = None
        self.matches = []
        self.match_pos = 0

    def _next(self):
        while True:
            if self.match_pos < len(self.matches):
                row = self.cur + self.matches[self.match_pos]
                self.match_pos += 1
                return row
            self.cur = self.outer.next()
            if self.cur is None:
                return None
            key = tuple(self.cur[i] for i in self.outer_keys)
            if None in key:
                continue
            self.matches = self.table.get(key, ())
            self.match_pos = 0

    def _close(self):
        self.outer.close()
        self.inner.close()
        self.table = {}


def output_columns(plan: PlanNode, catalog: Catalog) -> list[str]:
    """Qualified column names of the plan's output tuples, in tuple order."""
    if plan.is_scan:
        table = catalog.get_table(plan.table)
        return [f"{plan.table}.{c.name}" for c in table.columns]
    return output_columns(plan.outer, catalog) + output_columns(plan.inner, catalog)


class Executor:
    def __init__(self, catalog: Catalog):
        self.catalog = catalog

    def _build(self, node: PlanNode, runtimes: dict[int, _Runtime]) -> _Iter:
        runtime = runtimes.setdefault(node.node_id, _Runtime())
        if node.node_type == "SeqScan":
            return _SeqScan(runtime, self.catalog.get_table(node.table), node.quals)
        if node.node_type == "IndexScan":
            return _IndexScan(runtime, self.catalog.get_table(node.table), node.quals)
        outer = self._build(node.outer, runtimes)
        inner = self._build(node.inner, runtimes)
        pairs = _join_key_indexes(
            node.quals,
            output_columns(node.outer, self.catalog),
            output_columns(node.inner, self.catalog),
        )
        if node.node_type == "NestLoopJoin":
            return _NestLoop(runtime, outer, inner, pairs)
        if node.node_type == "HashJoin":
            return _HashJoin(runtime, outer, inner, pairs)
        raise RuntimeTypeError(f"unknown node type {node.node_type!r}")

    def execute(
        self,
        plan: PlanNode,
        query_text: str = "",
        query_class: str = "SELECT",
        collect: bool = True,
    ) -> tuple[list[tuple], ExecutionReport]:
        """Run the plan to completion; returns result rows (empty when
        collect=False) and the per-node runtime report."""
        runtimes: dict[int, _Runtime] = {}
        root = self._build(plan, runtimes)
        rows: list[tuple] = []
        count = 0
        start = time.perf_counter_ns()
        try:
            root.open()
            while True:
                row = root.next()
                if row is None:
                    break
                count += 1
                if collect:
                    rows.append(row)
        except TypeError as exc:
            raise RuntimeTypeError(str(exc)) from exc
        finally:
            root.close()
        total = time.perf_counter_ns() - start
        stats = {
            nid: NodeRuntimeStats(
                node_id=nid,
                actual_rows=rt.emitted // max(1, rt.opens),
                wall_time_ns=rt.ns,
                loops=max(1, rt.opens),
            )
            for nid, rt in runtimes.items()
        }
        report = ExecutionReport(
            query_text=query_text,
            plan=plan,
            node_stats=stats,
            total_time_ns=total,
            result_row_count=count,
            query_class=query_class,
            tables=tuple(sorted(plan.leaf_tables())),
        )
        return rows, report


def _fmt(value: float) -> str:
    return f"{value:.6g}"


def render_explain(report: ExecutionReport, analyze: bool = False) -> str:
    """One line per node, two-space indent per depth:
    `NodeType on <rel> (rows=<est> cost=<est>)`, with
    ` (actual rows=<n> time=<ms>)` appended under EXPLAIN ANALYZE."""
    lines = []
    for node, depth in report.plan.walk():
        head = f"{node.node_type} on {node.table}" if node.is_scan else node.node_type
        line = (
            "  " * depth
            + f"{head} (rows={_fmt(node.est_rows)} cost={_fmt(node.est_cost)})"
        )
        if analyze:
            stats = report.node_stats.get(node.node_id)
            if stats is not None:
                ms = stats.wall_time_ns / 1e6
                line += f" (actual rows={stats.actual_rows} time={ms:.3f})"
        lines.append(line)
    return "\n".join(lines)
