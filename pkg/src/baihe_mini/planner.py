"""Cost-based planner with hook points for cardinality, per-node cost, and
top-level steering.

Join ordering is Selinger-style dynamic programming over left-deep trees of
connected subgraphs. Every estimate first consults the active HookProvider;
values that are missing, malformed, or out of range fall back to the builtin
estimators and are counted, never fatal.
"""

from __future__ import annotations

import itertools

from .catalog import Catalog
from .costing import (
    DEFAULT_NUM_DISTINCT,
    CostConstants,
    baseline_selectivity,
    compose_cost,
    cost_node,
)
from .errors import DirectiveError, PlanningError
from .hooks import (
    NULL_HOOKS,
    HookProvider,
    cardest_payload,
    valid_cost,
    valid_selectivity,
)
from .plannodes import (
    DEFAULT_HINT_FAMILY,
    NAMED_HINT_SETS,
    HintSet,
    PlanNode,
    directive_leaves,
    parse_directive,
    renumber,
)
from .sqlast import (
    Predicate,
    QueryAst,
    extract_tq,
    filters_on,
    joins_within,
    predicates_within,
)

ROW_FLOOR = 1.0


class Planner:
    def __init__(
        self,
        catalog: Catalog,
        constants: CostConstants | None = None,
        allow_cross_products: bool = False,
        hint_family: tuple[str, ...] = DEFAULT_HINT_FAMILY,
    ):
        self.catalog = catalog
        self.constants = constants or CostConstants()
        self.allow_cross_products = allow_cross_products
        self.hint_family = tuple(hint_family)

    # --- public operations ---------------------------------------------------

    def plan(
        self,
        ast: QueryAst,
        session=None,
        hooks: HookProvider = NULL_HOOKS,
        hint_set: HintSet | None = None,
    ) -> PlanNode:
        run = _PlanRun(self, ast, session, hooks, hint_set)
        return renumber(run.best_join_tree())

    def steer(self, ast: QueryAst, session, hooks: HookProvider) -> PlanNode:
        """Build one candidate per hint set, let the STEER model pick."""
        candidates = []
        summaries = []
        for name in self.hint_family:
            hint = NAMED_HINT_SETS[name]
            plan = self.plan(ast, session, hooks, hint_set=hint)
            candidates.append(plan)
            summaries.append(
                {
                    "hint_set": hint.to_wire(),
                    "est_cost": plan.est_cost,
                    "est_rows": plan.est_rows,
                }
            )
        tables, predicates = extract_tq(ast)
        query_payload = cardest_payload(tables, predicates)
        outcome = hooks.steer(query_payload, summaries)
        if not outcome.ok:
            return self.plan(ast, session, hooks)
        result = outcome.payload
        if isinstance(result, dict) and "choice" in result:
            choice = result["choice"]
            if (
                isinstance(choice, int)
                and not isinstance(choice, bool)
                and 0 <= choice < len(candidates)
            ):
                return candidates[choice]
            self._reject(session, hooks, "STEER", f"invalid choice {choice!r}")
            return self.plan(ast, session, hooks)
        if isinstance(result, dict) and "plan_directive" in result:
            try:
                return self.apply_plan_directive(
                    result["plan_directive"], ast, session, hooks
                )
            except DirectiveError as exc:
                self._reject(session, hooks, "STEER", str(exc))
                return self.plan(ast, session, hooks)
        self._reject(session, hooks, "STEER", "malformed steering result")
        return self.plan(ast, session, hooks)

    def apply_plan_directive(
        self,
        directive,
        ast: QueryAst,
        session=None,
        hooks: HookProvider = NULL_HOOKS,
    ) -> PlanNode:
        """Convert an externally supplied join-tree skeleton to an executable
        plan, annotated with the active estimators; shape is followed exactly."""
        tree = parse_directive(directive)
        tables, _ = extract_tq(ast)
        leaves = directive_leaves(tree)
        if len(leaves) != len(set(leaves)):
            raise DirectiveError("directive references a table more than once")
        if set(leaves) != set(tables):
            raise DirectiveError(
                f"directive leaf set {sorted(leaves)} does not match query tables "
                f"{sorted(tables)}"
            )
        run = _PlanRun(self, ast, session, hooks, hint_set=HintSet())
        return renumber(run.from_directive(tree))

    def _reject(self, session, hooks: HookProvider, task: str, reason: str) -> None:
        if session is not None:
            session.note_fallback(task, reason)
        hooks.note_rejected(task, reason)


class _PlanRun:
    """Per-query planning state: memoized row estimates and scan choices."""

    def __init__(self, planner: Planner, ast: QueryAst, session, hooks, hint_set):
        self.planner = planner
        self.catalog = planner.catalog
        self.constants = planner.constants
        self.session = session
        self.hooks = hooks or NULL_HOOKS
        self.hint = hint_set or (session.hint_set if session is not None else HintSet())
        self.tables, self.predicates = extract_tq(ast)
        self.order = sorted(self.tables)
        self._rows: dict[frozenset[str], float] = {}
        self._scans: dict[str, PlanNode] = {}

    # --- estimates -------------------------------------------------------------

    def _count_fallback(self, task: str, reason: str) -> None:
        if self.session is not None:
            self.session.note_fallback(task, reason)

    def _reject_value(self, task: str, reason: str) -> None:
        self._count_fallback(task, reason)
        self.hooks.note_rejected(task, reason)

    def rows_of(self, subset: frozenset[str]) -> float:
        """Estimated output rows for the subproblem over `subset`, consulting
        the CardEst hook once per subset."""
        got = self._rows.get(subset)
        if got is not None:
            return got
        quals = predicates_within(self.predicates, subset)
        if len(subset) == 1:
            (table_name,) = subset
            outcome = self.hooks.table_selectivity(table_name, quals)
        else:
            outcome = self.hooks.join_selectivity(subset, quals)
        rows = None
        if outcome.ok:
            sel = outcome.payload
            if valid_selectivity(sel):
                raw = 1.0
                for t in subset:
                    raw *= self.catalog.get_table(t).row_count
                rows = max(ROW_FLOOR, sel * raw)
            else:
                self._reject_value("CARDEST", f"selectivity {sel!r} rejected")
        if rows is None:
            rows = self._builtin_rows(subset, quals)
        self._rows[subset] = rows
        return rows

    def _builtin_rows(self, subset: frozenset[str], quals) -> float:
        if len(subset) == 1:
            (table_name,) = subset
            table = self.catalog.get_table(table_name)
            sel = baseline_selectivity(table, filters_on(quals, table_name))
            return max(ROW_FLOOR, sel * table.row_count)
        rows = 1.0
        for t in sorted(subset):
            rows *= self.rows_per_table(t)
        for join in joins_within(quals, subset):
            nd_left = self._distinct(join.left_table, join.left_column)
            nd_right = self._distinct(join.right_table, join.right_column)
            rows /= max(nd_left, nd_right)
        return max(ROW_FLOOR, rows)

    def rows_per_table(self, table_name: str) -> float:
        return self.rows_of(frozenset((table_name,)))

    def _distinct(self, table_name: str, column: str) -> int:
        stats = self.catalog.get_table(table_name).stats.get(column)
        return stats.n_distinct if stats is not None else DEFAULT_NUM_DISTINCT

    def node_cost(self, node_type: str, features: dict) -> float:
        outcome = self.hooks.node_cost(node_type, features)
        if outcome.ok:
            cost = outcome.payload
            if valid_cost(cost):
                return float(cost)
            self._reject_value("COST", f"cost {cost!r} rejected")
        return cost_node(node_type, features, self.constants)

    # --- scans -------------------------------------------------------------------

    def scan_features(self, node_type: str, table, rows_out: float, qual_count: int) -> dict:
        return {
            "rows_in": float(table.row_count),
            "rows_out": rows_out,
            "pages": float(table.page_count),
            "qual_count": qual_count,
            "outer_rows": 0.0,
            "inner_rows": 0.0,
        }

    def _build_scan(self, node_type: str, table_name: str) -> PlanNode:
        table = self.catalog.get_table(table_name)
        quals = filters_on(self.predicates, table_name)
        rows_out = self.rows_per_table(table_name)
        features = self.scan_features(node_type, table, rows_out, len(quals))
        own = self.node_cost(node_type, features)
        return PlanNode(
            node_type=node_type,
            table=table_name,
            quals=quals,
            est_rows=rows_out,
            est_cost=compose_cost(node_type, own, 0.0, 0.0, 0.0),
            rows_in=float(table.row_count),
        )

    def _index_scan_applicable(self, table_name: str) -> bool:
        table = self.catalog.get_table(table_name)
        if table.primary_key is None:
            return False
        return any(
            q.op == "=" and q.column == table.primary_key and q.value is not None
            for q in filters_on(self.predicates, table_name)
        )

    def best_scan(self, table_name: str) -> PlanNode:
        got = self._scans.get(table_name)
        if got is not None:
            return got
        types = []
        if self.hint.enable_seqscan:
            types.append("SeqScan")
        if self.hint.enable_indexscan and self._index_scan_applicable(table_name):
            types.append("IndexScan")
        if not types:
            # hint set left no applicable scan; planning must stay total
            types = ["SeqScan"]
        best = None
        for node_type in types:
            cand = self._build_scan(node_type, table_name)
            if best is None or cand.est_cost < best.est_cost:
                best = cand
        self._scans[table_name] = best
        return best

    # --- joins -------------------------------------------------------------------

    def _connecting_joins(
        self, left: frozenset[str], right: frozenset[str]
    ) -> tuple[Predicate, ...]:
        out = []
        for p in self.predicates:
            if p.kind != "join":
                continue
            lt, rt = p.left_table, p.right_table
            if (lt in left and rt in right) or (lt in right and rt in left):
                out.append(p)
        return tuple(out)

    def build_join(
        self,
        node_type: str,
        left: PlanNode,
        right: PlanNode,
        quals: tuple[Predicate, ...],
    ) -> PlanNode:
        subset = left.leaf_tables() | right.leaf_tables()
        rows_out = self.rows_of(subset)
        features = {
            "rows_in": left.est_rows + right.est_rows,
            "rows_out": rows_out,
            "pages": 0.0,
            "qual_count": len(quals),
            "outer_rows": left.est_rows,
            "inner_rows": right.est_rows,
        }
        own = self.node_cost(node_type, features)
        total = compose_cost(node_type, own, left.est_cost, right.est_cost, left.est_rows)
        return PlanNode(
            node_type=node_type,
            quals=quals,
            children=(left, right),
            est_rows=rows_out,
            est_cost=total,
        )

    def join_candidates(
        self, left: PlanNode, right: PlanNode
    ) -> list[PlanNode]:
        quals = self._connecting_joins(left.leaf_tables(), right.leaf_tables())
        if not quals and not self.planner.allow_cross_products:
            return []
        out = []
        if self.hint.enable_nestloop:
            out.append(self.build_join("NestLoopJoin", left, right, quals))
        if self.hint.enable_hashjoin and quals:
            out.append(self.build_join("HashJoin", left, right, quals))
        if not out and quals:
            # hint set disabled every applicable join type; keep planning total
            out.append(self.build_join("NestLoopJoin", left, right, quals))
        return out

    def best_join_tree(self) -> PlanNode:
        if not self.order:
            raise PlanningError("query references no tables")
        if len(self.order) == 1:
            return self.best_scan(self.order[0])
        dp: dict[frozenset[str], PlanNode] = {
            frozenset((t,)): self.best_scan(t) for t in self.order
        }
        for size in range(2, len(self.order) + 1):
            for combo in itertools.combinations(self.order, size):
                subset = frozenset(combo)
                best = None
                for t in combo:
                    rest = subset - {t}
                    left = dp.get(rest)
                    if left is None:
                        continue
                    for cand in self.join_candidates(left, self.best_scan(t)):
                        if best is None or cand.est_cost < best.est_cost:
                            best = cand
                if best is not None:
                    dp[subset] = best
        full = dp.get(frozenset(self.order))
        if full is None:
            raise PlanningError(
                "query graph is disconnected and cross products are disabled"
            )
        return full

    # --- directives ----------------------------------------------------------------

    def from_directive(self, tree: dict) -> PlanNode:
        if "scan" in tree:
            node_type = tree["scan"]
            table_name = tree["table"]
            if node_type == "IndexScan" and not self._index_scan_applicable(table_name):
                raise DirectiveError(
                    f"IndexScan is not applicable to {table_name!r} "
                    "(needs an equality filter on its primary key)"
                )
            return self._build_scan(node_type, table_name)
        left = self.from_directive(tree["left"])
        right = self.from_directive(tree["right"])
        quals = self._connecting_joins(left.leaf_tables(), right.leaf_tables())
        node_type = tree["join"]
        if not quals:
            if node_type == "HashJoin":
                raise DirectiveError("HashJoin requires an applicable join predicate")
            if not self.planner.allow_cross_products:
                raise DirectiveError(
                    "directive forces a cross product and cross products are disabled"
                )
        return self.build_join(node_type, left, right, quals)
