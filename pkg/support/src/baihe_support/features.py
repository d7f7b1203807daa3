"""Query featurization shared by training and the packaged workers.

A schema is derived from the training rows: the ordered table and column
universe plus per-column literal ranges. A query payload vectorizes to
table-membership bits, then per (column, op) a presence bit and the
normalized literal, then per known join pair a presence bit.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

FILTER_OPS = ("=", "<>", "<", "<=", ">", ">=")


def _normalize(value, lo, hi) -> float:
    if isinstance(value, str):
        return (zlib.crc32(value.encode("utf-8")) % 1000) / 1000.0
    if value is None:
        return 0.5
    if hi > lo:
        x = (float(value) - lo) / (hi - lo)
        return min(1.0, max(0.0, x))
    return 0.5


@dataclass
class FeatureSchema:
    tables: list[str] = field(default_factory=list)
    columns: list[str] = field(default_factory=list)  # "table.column"
    join_pairs: list[tuple[str, str]] = field(default_factory=list)
    ranges: dict = field(default_factory=dict)  # column -> [lo, hi]

    @staticmethod
    def from_payloads(payloads) -> "FeatureSchema":
        tables: set[str] = set()
        columns: set[str] = set()
        joins: set[tuple[str, str]] = set()
        ranges: dict = {}
        for payload in payloads:
            tables.update(payload["tables"])
            for f in payload["filters"]:
                name = f"{f['table']}.{f['column']}"
                columns.add(name)
                value = f["value"]
                if isinstance(value, (int, float)) and not isinstance(value, bool):
                    lo, hi = ranges.get(name, (float(value), float(value)))
                    ranges[name] = (min(lo, float(value)), max(hi, float(value)))
            for j in payload["joins"]:
                joins.add((j["left"], j["right"]))
        return FeatureSchema(
            tables=sorted(tables),
            columns=sorted(columns),
            join_pairs=sorted(joins),
            ranges={k: list(v) for k, v in ranges.items()},
        )

    @property
    def width(self) -> int:
        return len(self.tables) + len(self.columns) * len(FILTER_OPS) * 2 + len(
            self.join_pairs
        )

    def vector(self, payload: dict) -> list[float]:
        out = [0.0] * self.width
        for t in payload.get("tables", ()):
            try:
                out[self.tables.index(t)] = 1.0
            except ValueError:
                continue
        base = len(self.tables)
        col_index = {c: i for i, c in enumerate(self.columns)}
        for f in payload.get("filters", ()):
            name = f"{f['table']}.{f['column']}"
            if name not in col_index or f["op"] not in FILTER_OPS:
                continue
            slot = base + (col_index[name] * len(FILTER_OPS) + FILTER_OPS.index(f["op"])) * 2
            lo, hi = self.ranges.get(name, (0.0, 0.0))
            out[slot] = 1.0
            out[slot + 1] = _normalize(f["value"], lo, hi)
        jbase = base + len(self.columns) * len(FILTER_OPS) * 2
        pair_index = {p: i for i, p in enumerate(self.join_pairs)}
        for j in payload.get("joins", ()):
            pair = (j["left"], j["right"])
            if pair in pair_index:
                out[jbase + pair_index[pair]] = 1.0
        return out

    def to_dict(self) -> dict:
        return {
            "tables": self.tables,
            "columns": self.columns,
            "join_pairs": [list(p) for p in self.join_pairs],
            "ranges": self.ranges,
        }

    @staticmethod
    def from_dict(data: dict) -> "FeatureSchema":
        return FeatureSchema(
            tables=list(data["tables"]),
            columns=list(data["columns"]),
            join_pairs=[tuple(p) for p in data["join_pairs"]],
            ranges={k: tuple(v) for k, v in data["ranges"].items()},
        )


def hint_set_vector(hint_set: dict) -> list[float]:
    keys = ("enable_hashjoin", "enable_nestloop", "enable_indexscan", "enable_seqscan")
    return [1.0 if hint_set.get(k, True) else 0.0 for k in keys]
