"""Load collected dataset files and derive training views.

The engine writes one JSON object per line to
`<data_dir>/datasets/<dataset_id>.v<version>.jsonl`. A TrainingFrame wraps
those records and expands them into task-shaped rows: per-subquery
(tables, predicates, cardinality) rows for cardinality models, per-node
feature rows for cost models.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

SCHEMA_VERSION = 1


class DatasetError(Exception):
    pass


class SchemaVersionError(DatasetError):
    pass


@dataclass(frozen=True)
class CardestRow:
    """One (subquery, cardinality) training example, expanded per plan node."""

    tables: tuple[str, ...]
    filters: tuple[tuple, ...]  # (table, column, op, value)
    joins: tuple[tuple, ...]  # (left, right) as "table.column" strings
    cardinality: int
    table_rows_product: float

    @property
    def selectivity(self) -> float:
        if self.table_rows_product <= 0:
            return 0.0
        return min(1.0, self.cardinality / self.table_rows_product)

    def payload(self) -> dict:
        """Wire-shaped (T, Q) payload, matching what CARDEST workers receive."""
        return {
            "tables": sorted(self.tables),
            "filters": [
                {"table": t, "column": c, "op": op, "value": v}
                for t, c, op, v in sorted(
                    self.filters, key=lambda f: (f[0], f[1], f[2], repr(f[3]))
                )
            ],
            "joins": [
                {"left": left, "right": right}
                for left, right in sorted(self.joins)
            ],
        }


@dataclass(frozen=True)
class CostRow:
    """Per-node cost example with the COST-task feature record and targets."""

    features: dict  # node_type, rows_in, rows_out, pages, qual_count, outer_rows, inner_rows
    wall_time_ms: float
    est_cost: float
    actual_rows: int


@dataclass
class TrainingFrame:
    dataset_id: str
    version: int
    records: list[dict] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    # --- derivations -----------------------------------------------------------

    def cardest_rows(self) -> list[CardestRow]:
        rows: list[CardestRow] = []
        for record in self.records:
            plan = record.get("plan")
            nodes = record.get("nodes")
            if not plan or not nodes:
                continue
            actual = {
                n["node_id"]: n.get("actual_rows")
                for n in nodes
                if "actual_rows" in n
            }
            for node in _walk(plan):
                node_id = node.get("node_id")
                if node_id not in actual:
                    continue
                tables, filters, joins, rows_product = _subtree_query(node)
                rows.append(
                    CardestRow(
                        tables=tuple(sorted(tables)),
                        filters=tuple(filters),
                        joins=tuple(joins),
                        cardinality=actual[node_id],
                        table_rows_product=rows_product,
                    )
                )
        return rows

    def cost_rows(self) -> list[CostRow]:
        rows: list[CostRow] = []
        for record in self.records:
            plan = record.get("plan")
            nodes = record.get("nodes")
            if not plan or not nodes:
                continue
            info = {n["node_id"]: n for n in nodes}
            for node in _walk(plan):
                entry = info.get(node.get("node_id"))
                if entry is None or "actual_rows" not in entry:
                    continue
                features = _cost_features(node, info)
                rows.append(
                    CostRow(
                        features=features,
                        wall_time_ms=entry["wall_time_ns"] / 1e6,
                        est_cost=entry.get("est_cost", 0.0),
                        actual_rows=entry["actual_rows"],
                    )
                )
        return rows

    def query_texts(self) -> list[str]:
        return [r["query_text"] for r in self.records if "query_text" in r]


def _walk(node: dict):
    yield node
    if "join" in node:
        yield from _walk(node["left"])
        yield from _walk(node["right"])


def _subtree_query(node: dict):
    """Tables, filter tuples, join tuples, and base-row product under a node."""
    tables: list[str] = []
    filters: list[tuple] = []
    joins: list[tuple] = []
    product = 1.0
    for sub in _walk(node):
        for qual in sub.get("quals", ()):
            if "column" in qual:
                filters.append(
                    (qual["table"], qual["column"], qual["op"], qual["value"])
                )
            else:
                joins.append((qual["left"], qual["right"]))
        if "scan" in sub:
            tables.append(sub["table"])
            product *= float(sub.get("table_rows", 0.0))
    return tables, filters, joins, product


def _cost_features(node: dict, info: dict) -> dict:
    entry = info[node["node_id"]]
    if "scan" in node:
        table_rows = float(node.get("table_rows", 0.0))
        return {
            "node_type": node["scan"],
            "rows_in": table_rows,
            "rows_out": float(entry["actual_rows"]),
            "pages": float(int((table_rows + 99) // 100)),
            "qual_count": len(node.get("quals", ())),
            "outer_rows": 0.0,
            "inner_rows": 0.0,
        }
    left = info[node["left"]["node_id"]]
    right = info[node["right"]["node_id"]]
    outer_rows = float(left["actual_rows"])
    inner_rows = float(right["actual_rows"])
    return {
        "node_type": node["join"],
        "rows_in": outer_rows + inner_rows,
        "rows_out": float(entry["actual_rows"]),
        "pages": 0.0,
        "qual_count": len(node.get("quals", ())),
        "outer_rows": outer_rows,
        "inner_rows": inner_rows,
    }


def dataset_path(data_dir: str | Path, dataset_id: str, version: int) -> Path:
    return Path(data_dir) / "datasets" / f"{dataset_id}.v{version}.jsonl"


def fetch_dataset(data_dir: str | Path, dataset_id: str, version: int) -> TrainingFrame:
    """Load every record of one dataset version."""
    path = dataset_path(data_dir, dataset_id, version)
    if not path.is_file():
        raise DatasetError(f"dataset file {path} does not exist")
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            if record.get("schema") != SCHEMA_VERSION:
                raise SchemaVersionError(
                    f"{path}:{lineno}: schema {record.get('schema')!r}, "
                    f"expected {SCHEMA_VERSION}"
                )
            records.append(record)
    return TrainingFrame(dataset_id=dataset_id, version=version, records=records)
