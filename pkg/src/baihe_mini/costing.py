"""Builtin cost model and baseline selectivity estimators.

Costs are abstract units driven by a handful of constants. Per-node cost is
split into the node's own contribution (`cost_node`, the quantity a COST
model may overwrite) and the composition with child totals (`compose_cost`),
so that total plan cost follows:

    SeqScan   = pages*seq_page_cost + rows_in*cpu_tuple_cost
                + rows_in*qual_count*cpu_operator_cost
    IndexScan = log2(max(rows_in, 2))*index_page_cost + rows_out*cpu_tuple_cost
    NestLoop  = outer_total + outer_rows*inner_total
                + outer_rows*inner_rows*cpu_operator_cost + rows_out*cpu_tuple_cost
    HashJoin  = outer_total + inner_total + inner_rows*hash_build_cost_per_row
                + outer_rows*cpu_operator_cost + rows_out*cpu_tuple_cost
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Iterable

from .catalog import ColumnStats, Table
from .sqlast import Predicate, compare

# defaults when a column has no statistics
DEFAULT_EQ_SEL = 0.005
DEFAULT_RANGE_SEL = 0.33
TEXT_RANGE_SEL = 0.33
DEFAULT_NUM_DISTINCT = 200

SCAN_TYPES = ("SeqScan", "IndexScan")
JOIN_TYPES = ("NestLoopJoin", "HashJoin")


@dataclass(frozen=True)
class CostConstants:
    seq_page_cost: float = 1.0
    cpu_tuple_cost: float = 0.01
    cpu_operator_cost: float = 0.0025
    index_page_cost: float = 0.5
    hash_build_cost_per_row: float = 0.02

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if getattr(self, name) <= 0:
                raise ValueError(f"cost constant {name} must be strictly positive")


def cost_node(node_type: str, features: dict, constants: CostConstants) -> float:
    """The node's own cost contribution, from the feature record a COST
    model also receives; child totals are added by compose_cost."""
    rows_in = features.get("rows_in", 0.0)
    rows_out = features.get("rows_out", 0.0)
    pages = features.get("pages", 0.0)
    qual_count = features.get("qual_count", 0)
    outer_rows = features.get("outer_rows", 0.0)
    inner_rows = features.get("inner_rows", 0.0)
    if node_type == "SeqScan":
        return (
            pages * constants.seq_page_cost
            + rows_in * constants.cpu_tuple_cost
            + rows_in * qual_count * constants.cpu_operator_cost
        )
    if node_type == "IndexScan":
        return (
            math.log2(max(rows_in, 2)) * constants.index_page_cost
            + rows_out * constants.cpu_tuple_cost
        )
    if node_type == "NestLoopJoin":
        return (
            outer_rows * inner_rows * constants.cpu_operator_cost
            + rows_out * constants.cpu_tuple_cost
        )
    if node_type == "HashJoin":
        return (
            inner_rows * constants.hash_build_cost_per_row
            + outer_rows * constants.cpu_operator_cost
            + rows_out * constants.cpu_tuple_cost
        )
    raise ValueError(f"unknown node type {node_type!r}")


def compose_cost(
    node_type: str,
    node_cost: float,
    outer_total: float,
    inner_total: float,
    outer_rows: float,
) -> float:
    """Total cost of a node given its own cost and its children's totals."""
    if node_type in SCAN_TYPES:
        return node_cost
    if node_type == "NestLoopJoin":
        return outer_total + outer_rows * inner_total + node_cost
    if node_type == "HashJoin":
        return outer_total + inner_total + node_cost
    raise ValueError(f"unknown node type {node_type!r}")


def baseline_join_rows(
    left_rows: float, right_rows: float, nd_left: int, nd_right: int
) -> float:
    """Classic distinct-count equi-join estimate, floored at one row."""
    if nd_left < 1 or nd_right < 1:
        raise ValueError("distinct counts must be >= 1")
    return max(1.0, left_rows * right_rows / max(nd_left, nd_right))


def histogram_fraction(boundaries: tuple, op: str, value) -> float:
    """Fraction of the histogram population satisfying `column op value`,
    with linear interpolation inside the containing bucket."""
    buckets = len(boundaries) - 1
    if buckets < 1:
        return DEFAULT_RANGE_SEL
    lo, hi = boundaries[0], boundaries[-1]
    if value <= lo:
        below = 0.0
    elif value >= hi:
        below = 1.0
    else:
        i = min(bisect.bisect_right(boundaries, value) - 1, buckets - 1)
        width = boundaries[i + 1] - boundaries[i]
        within = 0.5 if width == 0 else (value - boundaries[i]) / width
        below = (i + within) / buckets
    if op in ("<", "<="):
        return below
    return 1.0 - below


def _equality_selectivity(stats: ColumnStats | None, value) -> float:
    if stats is None:
        return DEFAULT_EQ_SEL
    for mcv_value, freq in stats.mcv:
        if mcv_value == value:
            return freq
    return 1.0 / stats.n_distinct


def _range_selectivity(stats: ColumnStats | None, kind: str, op: str, value) -> float:
    if kind == "text":
        return TEXT_RANGE_SEL
    if stats is None:
        return DEFAULT_RANGE_SEL
    mcv_part = sum(freq for v, freq in stats.mcv if compare(op, v, value))
    if not stats.histogram:
        if stats.mcv:
            return mcv_part
        return DEFAULT_RANGE_SEL
    weight = max(0.0, 1.0 - stats.null_frac - stats.mcv_total_freq)
    return histogram_fraction(stats.histogram, op, value) * weight + mcv_part


def predicate_selectivity(table: Table, pred: Predicate) -> float:
    stats = table.stats.get(pred.column)
    kind = table.column_kind(pred.column)
    if pred.op == "=":
        sel = _equality_selectivity(stats, pred.value)
    elif pred.op == "<>":
        sel = 1.0 - _equality_selectivity(stats, pred.value)
    else:
        sel = _range_selectivity(stats, kind, pred.op, pred.value)
    return min(1.0, max(0.0, sel))


def baseline_selectivity(table: Table, quals: Iterable[Predicate]) -> float:
    """Product of per-predicate selectivities under attribute independence."""
    sel = 1.0
    for pred in quals:
        sel *= predicate_selectivity(table, pred)
    return sel
