"""Plan tree nodes, hint sets, and the plan-directive wire form."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import DirectiveError
from .sqlast import Predicate

SCAN_TYPES = ("SeqScan", "IndexScan")
JOIN_TYPES = ("NestLoopJoin", "HashJoin")


@dataclass
class PlanNode:
    """One node of a query plan.

    Scans carry their table and filter quals; joins carry two children and
    their join predicates. node_ids are assigned in preorder once a final
    plan is chosen.
    """

    node_type: str
    table: str | None = None
    quals: tuple[Predicate, ...] = ()
    children: tuple["PlanNode", ...] = ()
    est_rows: float = 0.0
    est_cost: float = 0.0
    node_id: int = 0
    rows_in: float = 0.0  # scans: table row count at plan time

    @property
    def is_scan(self) -> bool:
        return self.node_type in SCAN_TYPES

    @property
    def outer(self) -> "PlanNode":
        return self.children[0]

    @property
    def inner(self) -> "PlanNode":
        return self.children[1]

    def leaf_tables(self) -> frozenset[str]:
        if self.is_scan:
            return frozenset((self.table,))
        out: set[str] = set()
        for child in self.children:
            out |= child.leaf_tables()
        return frozenset(out)

    def walk(self):
        """Preorder traversal of (node, depth) pairs."""
        stack = [(self, 0)]
        while stack:
            node, depth = stack.pop()
            yield node, depth
            for child in reversed(node.children):
                stack.append((child, depth + 1))


def renumber(plan: PlanNode) -> PlanNode:
    for i, (node, _) in enumerate(plan.walk(), start=1):
        node.node_id = i
    return plan


def structure_signature(plan: PlanNode, with_estimates: bool = False) -> tuple:
    """Hashable summary for structural plan comparison."""
    base = (
        plan.node_type,
        plan.table,
        tuple(sorted(q.sort_key() for q in plan.quals)),
    )
    if with_estimates:
        base = base + (plan.est_rows, plan.est_cost)
    return base + tuple(
        structure_signature(c, with_estimates) for c in plan.children
    )


def plan_to_wire(
    plan: PlanNode,
    *,
    with_estimates: bool = False,
    with_quals: bool = False,
    with_node_ids: bool = False,
    with_table_rows: bool = False,
) -> dict:
    """Directive-form tree, optionally annotated for snapshots and models."""
    if plan.is_scan:
        out: dict = {"scan": plan.node_type, "table": plan.table}
        if with_table_rows:
            out["table_rows"] = plan.rows_in
    else:
        out = {
            "join": plan.node_type,
            "left": plan_to_wire(
                plan.outer,
                with_estimates=with_estimates,
                with_quals=with_quals,
                with_node_ids=with_node_ids,
                with_table_rows=with_table_rows,
            ),
            "right": plan_to_wire(
                plan.inner,
                with_estimates=with_estimates,
                with_quals=with_quals,
                with_node_ids=with_node_ids,
                with_table_rows=with_table_rows,
            ),
        }
    if with_node_ids:
        out["node_id"] = plan.node_id
    if with_estimates:
        out["est_rows"] = plan.est_rows
        out["est_cost"] = plan.est_cost
    if with_quals:
        out["quals"] = [q.to_wire() for q in plan.quals]
    return out


def parse_directive(directive) -> dict:
    """Accept a directive as dict or JSON text and check its shape.

    Semantic validation (leaf set, operator applicability) happens when the
    directive is converted to an executable plan.
    """
    if isinstance(directive, str):
        try:
            directive = json.loads(directive)
        except json.JSONDecodeError as exc:
            raise DirectiveError(f"directive is not valid JSON: {exc}") from None
    _check_directive_shape(directive)
    return directive


def _check_directive_shape(node) -> None:
    if not isinstance(node, dict):
        raise DirectiveError("directive nodes must be objects")
    if "scan" in node:
        if node["scan"] not in SCAN_TYPES:
            raise DirectiveError(f"unsupported scan type {node['scan']!r}")
        if not isinstance(node.get("table"), str):
            raise DirectiveError("scan node needs a table name")
        return
    if "join" in node:
        if node["join"] not in JOIN_TYPES:
            raise DirectiveError(f"unsupported join type {node['join']!r}")
        if "left" not in node or "right" not in node:
            raise DirectiveError("join node needs left and right children")
        _check_directive_shape(node["left"])
        _check_directive_shape(node["right"])
        return
    raise DirectiveError("directive node needs a 'scan' or 'join' key")


def directive_leaves(node: dict) -> list[str]:
    if "scan" in node:
        return [node["table"]]
    return directive_leaves(node["left"]) + directive_leaves(node["right"])


@dataclass(frozen=True)
class HintSet:
    enable_hashjoin: bool = True
    enable_nestloop: bool = True
    enable_indexscan: bool = True
    enable_seqscan: bool = True

    def __post_init__(self):
        if not (self.enable_hashjoin or self.enable_nestloop):
            raise ValueError("at least one join type must stay enabled")
        if not (self.enable_indexscan or self.enable_seqscan):
            raise ValueError("at least one scan type must stay enabled")

    def allows(self, node_type: str) -> bool:
        return {
            "HashJoin": self.enable_hashjoin,
            "NestLoopJoin": self.enable_nestloop,
            "IndexScan": self.enable_indexscan,
            "SeqScan": self.enable_seqscan,
        }[node_type]

    def to_wire(self) -> dict:
        return {
            "enable_hashjoin": self.enable_hashjoin,
            "enable_nestloop": self.enable_nestloop,
            "enable_indexscan": self.enable_indexscan,
            "enable_seqscan": self.enable_seqscan,
        }

    def with_flag(self, name: str, value: bool) -> "HintSet":
        flags = self.to_wire()
        if name not in flags:
            raise ValueError(f"unknown hint flag {name!r}")
        flags[name] = value
        return HintSet(**flags)


NAMED_HINT_SETS = {
    "all": HintSet(),
    "no_hashjoin": HintSet(enable_hashjoin=False),
    "no_nestloop": HintSet(enable_nestloop=False),
    "no_indexscan": HintSet(enable_indexscan=False),
    "seq_nestloop": HintSet(enable_hashjoin=False, enable_indexscan=False),
}

DEFAULT_HINT_FAMILY = (
    "all",
    "no_hashjoin",
    "no_nestloop",
    "no_indexscan",
    "seq_nestloop",
)
