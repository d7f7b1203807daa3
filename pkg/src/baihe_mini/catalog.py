"""In-memory row storage, CSV ingestion, and planner statistics.

Tables are row-oriented lists of tuples owned by a single engine session
thread. A synthesized page count (100 rows per page) feeds the cost model;
there is no buffer manager. `analyze` builds the per-column statistics the
baseline estimators read: distinct counts, null fraction, most-common values,
and an equi-depth histogram over the non-MCV remainder of numeric columns.
"""

from __future__ import annotations

import bisect
import csv
import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

from .errors import (
    CsvTypeError,
    DuplicateTableError,
    InvalidSchemaError,
    TableNotFoundError,
    TypeMismatchError,
    UnknownColumnError,
)
from .sqlast import Predicate, compare

COLUMN_KINDS = ("int64", "float64", "text")
ROWS_PER_PAGE = 100

DEFAULT_HISTOGRAM_BUCKETS = 32
DEFAULT_MCV_LIMIT = 8

# a value must be this much more frequent than average to enter the MCV list
_MCV_OVER_AVERAGE = 1.25


@dataclass(frozen=True)
class ColumnDef:
    name: str
    kind: str


@dataclass(frozen=True)
class ColumnStats:
    n_distinct: int  # >= 1
    null_frac: float
    histogram: tuple  # equi-depth boundaries, numeric columns only
    mcv: tuple  # ((value, frequency), ...) sorted by descending frequency

    @property
    def mcv_total_freq(self) -> float:
        return sum(f for _, f in self.mcv)


def parse_field(text: str, kind: str) -> Any:
    """Parse one CSV field; empty string means null."""
    if text == "":
        return None
    if kind == "int64":
        return int(text)
    if kind == "float64":
        return float(text)
    return text


def _check_value(value: Any, kind: str, context: str) -> Any:
    if value is None:
        return None
    if kind == "int64":
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeMismatchError(f"{context}: expected int64, got {value!r}")
        return value
    if kind == "float64":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeMismatchError(f"{context}: expected float64, got {value!r}")
        return float(value)
    if not isinstance(value, str):
        raise TypeMismatchError(f"{context}: expected text, got {value!r}")
    return value


class Table:
    """Table definition plus its stored rows.

    Serves as both the schema entry and the storage; rows are tuples in
    insertion order. An optional primary-key column gets a sorted index
    (value, row position) maintained on every append.
    """

    def __init__(self, name: str, columns: Sequence[ColumnDef], primary_key: str | None = None):
        self.name = name
        self.columns = tuple(columns)
        self.primary_key = primary_key
        self.rows: list[tuple] = []
        self.stats: dict[str, ColumnStats] = {}
        self._col_index = {c.name: i for i, c in enumerate(self.columns)}
        self._pk_index: list[tuple[Any, int]] = []

    @property
    def row_count(self) -> int:
        return len(self.rows)

    @property
    def page_count(self) -> int:
        return math.ceil(self.row_count / ROWS_PER_PAGE) if self.rows else 0

    def column_index(self, name: str) -> int | None:
        return self._col_index.get(name)

    def column_kind(self, name: str) -> str:
        idx = self._col_index.get(name)
        if idx is None:
            raise UnknownColumnError(f"{self.name}.{name} does not exist")
        return self.columns[idx].kind

    def append(self, row: tuple) -> None:
        if self.primary_key is not None:
            key = row[self._col_index[self.primary_key]]
            if key is not None:
                bisect.insort(self._pk_index, (key, len(self.rows)))
        self.rows.append(row)

    def pk_lookup(self, value: Any) -> list[int]:
        """Row positions whose primary-key column equals value."""
        if self.primary_key is None or value is None:
            return []
        lo = bisect.bisect_left(self._pk_index, (value,))
        out = []
        for key, pos in self._pk_index[lo:]:
            if key != value:
                break
            out.append(pos)
        return out


class Catalog:
    def __init__(self):
        self.tables: dict[str, Table] = {}

    # --- schema ------------------------------------------------------------

    def create_table(
        self,
        name: str,
        columns: Sequence[ColumnDef],
        primary_key: str | None = None,
    ) -> Table:
        if name in self.tables:
            raise DuplicateTableError(f"table {name!r} already exists")
        if not columns:
            raise InvalidSchemaError("a table needs at least one column")
        names = [c.name for c in columns]
        if len(set(names)) != len(names):
            raise InvalidSchemaError(f"duplicate column names in {name!r}")
        for c in columns:
            if c.kind not in COLUMN_KINDS:
                raise InvalidSchemaError(f"unknown column kind {c.kind!r}")
        if primary_key is not None and primary_key not in names:
            raise InvalidSchemaError(f"primary key {primary_key!r} is not a column")
        table = Table(name, columns, primary_key)
        self.tables[name] = table
        return table

    def get_table(self, name: str) -> Table:
        table = self.tables.get(name)
        if table is None:
            raise TableNotFoundError(f"table {name!r} does not exist")
        return table

    def has_table(self, name: str) -> bool:
        return name in self.tables

    def drop_table(self, name: str) -> None:
        self.get_table(name)
        del self.tables[name]

    # --- ingestion ----------------------------------------------------------

    def load_csv(self, table_name: str, path: str | Path, has_header: bool = False) -> int:
        table = self.get_table(table_name)
        count = 0
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            for lineno, record in enumerate(reader, start=1):
                if has_header and lineno == 1:
                    continue
                if not record:
                    continue
                if len(record) != len(table.columns):
                    raise CsvTypeError(
                        f"expected {len(table.columns)} fields, got {len(record)}",
                        lineno,
                    )
                values = []
                for col, text in zip(table.columns, record):
                    try:
                        values.append(parse_field(text, col.kind))
                    except ValueError:
                        raise CsvTypeError(
                            f"{text!r} is not a valid {col.kind} for column {col.name!r}",
                            lineno,
                        ) from None
                table.append(tuple(values))
                count += 1
        return count

    def insert_rows(self, table_name: str, rows: Iterable[Sequence]) -> int:
        table = self.get_table(table_name)
        count = 0
        for row in rows:
            if len(row) != len(table.columns):
                raise TypeMismatchError(
                    f"{table_name}: expected {len(table.columns)} values, got {len(row)}"
                )
            checked = tuple(
                _check_value(v, c.kind, f"{table_name}.{c.name}")
                for v, c in zip(row, table.columns)
            )
            table.append(checked)
            count += 1
        return count

    def export_csv(self, table_name: str, path: str | Path) -> int:
        table = self.get_table(table_name)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            for row in table.rows:
                writer.writerow(["" if v is None else v for v in row])
        return table.row_count

    # --- statistics ----------------------------------------------------------

    def analyze(
        self,
        table_name: str,
        histogram_buckets: int = DEFAULT_HISTOGRAM_BUCKETS,
        mcv_limit: int = DEFAULT_MCV_LIMIT,
    ) -> dict[str, ColumnStats]:
        table = self.get_table(table_name)
        stats: dict[str, ColumnStats] = {}
        total = table.row_count
        for i, col in enumerate(table.columns):
            values = [row[i] for row in table.rows]
            non_null = [v for v in values if v is not None]
            null_frac = (total - len(non_null)) / total if total else 0.0
            counts = Counter(non_null)
            n_distinct = max(1, len(counts))

            mcv = _pick_mcv(counts, len(non_null), total, mcv_limit)
            mcv_values = {v for v, _ in mcv}

            histogram: tuple = ()
            if col.kind in ("int64", "float64"):
                remainder = sorted(v for v in non_null if v not in mcv_values)
                histogram = _equi_depth_boundaries(remainder, histogram_buckets)

            stats[col.name] = ColumnStats(
                n_distinct=n_distinct,
                null_frac=null_frac,
                histogram=histogram,
                mcv=mcv,
            )
        table.stats = stats
        return stats

    # --- oracle ----------------------------------------------------------------

    def true_cardinality(
        self, tables: Iterable[str], predicates: Iterable[Predicate]
    ) -> int:
        """Exact result count of the filtered cross product, by brute force.

        Backtracking nested loops over the tables in sorted order; every
        predicate is applied as soon as all of its tables are bound. Kept
        independent of the planner and executor so it can serve as their
        test oracle.
        """
        order = sorted(set(tables))
        tabs = [self.get_table(t) for t in order]
        for p in predicates:
            for t in p.tables:
                if t not in order:
                    raise UnknownColumnError(f"predicate references {t!r} outside table set")
            if p.kind == "filter":
                self.get_table(p.table).column_kind(p.column)
            else:
                self.get_table(p.left_table).column_kind(p.left_column)
                self.get_table(p.right_table).column_kind(p.right_column)

        # predicates grouped by the loop depth at which they become checkable
        position = {t: i for i, t in enumerate(order)}
        by_depth: list[list[Predicate]] = [[] for _ in order]
        for p in predicates:
            depth = max(position[t] for t in p.tables)
            by_depth[depth].append(p)

        col_idx = [
            {c.name: j for j, c in enumerate(t.columns)} for t in tabs
        ]
        bound: list[tuple] = [()] * len(order)

        def value_of(table: str, column: str) -> Any:
            i = position[table]
            return bound[i][col_idx[i][column]]

        def holds(p: Predicate) -> bool:
            if p.kind == "filter":
                return compare(p.op, value_of(p.table, p.column), p.value)
            lv = value_of(p.left_table, p.left_column)
            rv = value_of(p.right_table, p.right_column)
            return lv is not None and lv == rv

        def walk(depth: int) -> int:
            if depth == len(order):
                return 1
            total = 0
            checks = by_depth[depth]
            for row in tabs[depth].rows:
                bound[depth] = row
                if all(holds(p) for p in checks):
                    total += walk(depth + 1)
            return total

        return walk(0)

    # --- snapshots ----------------------------------------------------------------

    def snapshot(self, table_name: str, data_dir: str | Path) -> Path:
        table = self.get_table(table_name)
        tables_dir = Path(data_dir) / "tables"
        tables_dir.mkdir(parents=True, exist_ok=True)
        path = tables_dir / f"{table.name}.jsonl"
        with open(path, "w", encoding="utf-8") as fh:
            header = {
                "schema": 1,
                "table": table.name,
                "columns": [{"name": c.name, "kind": c.kind} for c in table.columns],
                "primary_key": table.primary_key,
            }
            if table.stats:
                # analyzed statistics survive restarts; the command surface
                # has no ANALYZE statement to rebuild them
                header["stats"] = {
                    name: {
                        "n_distinct": s.n_distinct,
                        "null_frac": s.null_frac,
                        "histogram": list(s.histogram),
                        "mcv": [[v, f] for v, f in s.mcv],
                    }
                    for name, s in table.stats.items()
                }
            fh.write(json.dumps(header) + "\n")
            for row in table.rows:
                fh.write(json.dumps(list(row)) + "\n")
        return path

    def snapshot_all(self, data_dir: str | Path) -> int:
        for name in sorted(self.tables):
            self.snapshot(name, data_dir)
        return len(self.tables)

    def restore_all(self, data_dir: str | Path) -> int:
        """Load every table snapshot under <data_dir>/tables; skips existing names."""
        tables_dir = Path(data_dir) / "tables"
        if not tables_dir.is_dir():
            return 0
        restored = 0
        for path in sorted(tables_dir.glob("*.jsonl")):
            with open(path, encoding="utf-8") as fh:
                header = json.loads(fh.readline())
                name = header["table"]
                if name in self.tables:
                    continue
                columns = [ColumnDef(c["name"], c["kind"]) for c in header["columns"]]
                table = self.create_table(name, columns, header.get("primary_key"))
                kinds = {c.name: c.kind for c in columns}
                for col_name, s in (header.get("stats") or {}).items():
                    fix = (
                        (lambda v: float(v) if v is not None else None)
                        if kinds.get(col_name) == "float64"
                        else (lambda v: v)
                    )
                    table.stats[col_name] = ColumnStats(
                        n_distinct=s["n_distinct"],
                        null_frac=s["null_frac"],
                        histogram=tuple(fix(v) for v in s["histogram"]),
                        mcv=tuple((fix(v), f) for v, f in s["mcv"]),
                    )
                for line in fh:
                    values = json.loads(line)
                    table.append(
                        tuple(
                            float(v) if c.kind == "float64" and v is not None else v
                            for v, c in zip(values, columns)
                        )
                    )
            restored += 1
        return restored


def _pick_mcv(
    counts: Counter, non_null: int, total: int, mcv_limit: int
) -> tuple:
    """Most-common values with frequencies relative to total row count.

    With few distinct values the whole population is listed; otherwise only
    values noticeably more frequent than the per-value average qualify, so a
    uniform column keeps its full histogram resolution.
    """
    if not counts or total == 0 or mcv_limit <= 0:
        return ()
    if len(counts) <= mcv_limit:
        items = counts.items()
    else:
        average = non_null / len(counts)
        items = [
            (v, n) for v, n in counts.items() if n > _MCV_OVER_AVERAGE * average
        ]
    ranked = sorted(items, key=lambda vn: (-vn[1], repr(vn[0])))[:mcv_limit]
    return tuple((v, n / total) for v, n in ranked)


def _equi_depth_boundaries(sorted_values: list, buckets: int) -> tuple:
    """Bucket boundaries covering the values with ~equal population each."""
    n = len(sorted_values)
    if n == 0 or buckets < 1:
        return ()
    return tuple(
        sorted_values[(j * (n - 1)) // buckets] for j in range(buckets + 1)
    )
