"""AST types for the SQL subset and the control-command surface.

A parsed query keeps its raw WHERE comparisons; binding against a catalog
normalizes them into typed `Predicate` values (fully qualified column refs,
set semantics) which is the form every estimator and hook consumes.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Iterable

from .errors import TypeMismatchError, UnboundColumnError, UnsupportedFeatureError

COMPARE_OPS = ("=", "<>", "<", "<=", ">", ">=")

_OP_FUNCS = {
    "=": operator.eq,
    "<>": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}

# mirror image of an operator when its operands are swapped
_FLIP = {"=": "=", "<>": "<>", "<": ">", "<=": ">=", ">": "<", ">=": "<="}


def compare(op: str, left: Any, right: Any) -> bool:
    """SQL-ish comparison: any null operand yields false."""
    if left is None or right is None:
        return False
    return _OP_FUNCS[op](left, right)


class QueryClass(Enum):
    SELECT = "SELECT"
    INSERT = "INSERT"
    EXPLAIN = "EXPLAIN"
    EXPLAIN_ANALYZE = "EXPLAIN_ANALYZE"


class ControlVerb(Enum):
    DEFINE_DATA_COLLECTOR = "DEFINE_DATA_COLLECTOR"
    START_DATA_COLLECTOR = "START_DATA_COLLECTOR"
    STOP_DATA_COLLECTOR = "STOP_DATA_COLLECTOR"
    REGISTER_MODEL = "REGISTER_MODEL"
    START_MODEL = "START_MODEL"
    RESET_MODEL = "RESET_MODEL"
    SET = "SET"
    SHOW = "SHOW"


# argument count expected for each CALL verb
CALL_ARITY = {
    ControlVerb.DEFINE_DATA_COLLECTOR: 3,
    ControlVerb.START_DATA_COLLECTOR: 3,
    ControlVerb.STOP_DATA_COLLECTOR: 1,
    ControlVerb.REGISTER_MODEL: 5,
    ControlVerb.START_MODEL: 1,
    ControlVerb.RESET_MODEL: 1,
}


@dataclass(frozen=True)
class ColumnRef:
    qualifier: str | None
    name: str

    def render(self) -> str:
        return f"{self.qualifier}.{self.name}" if self.qualifier else self.name


@dataclass(frozen=True)
class Literal:
    value: Any  # int, float, str, or None

    def render(self) -> str:
        if self.value is None:
            return "NULL"
        if isinstance(self.value, str):
            escaped = self.value.replace("'", "''")
            return f"'{escaped}'"
        return repr(self.value)


@dataclass(frozen=True)
class Comparison:
    """Raw WHERE condition as written; sides are ColumnRef or Literal."""

    left: ColumnRef | Literal
    op: str
    right: ColumnRef | Literal

    def render(self) -> str:
        return f"{self.left.render()} {self.op} {self.right.render()}"


@dataclass(frozen=True)
class Predicate:
    """Bound, normalized predicate.

    filter: (table.column op value); join: (left = right) with the sides
    ordered by (table, column) so duplicates collapse under set semantics.
    """

    kind: str  # "filter" | "join"
    table: str = ""
    column: str = ""
    op: str = "="
    value: Any = None
    left_table: str = ""
    left_column: str = ""
    right_table: str = ""
    right_column: str = ""

    @staticmethod
    def filter(table: str, column: str, op: str, value: Any) -> "Predicate":
        return Predicate(kind="filter", table=table, column=column, op=op, value=value)

    @staticmethod
    def join(lt: str, lc: str, rt: str, rc: str) -> "Predicate":
        if (rt, rc) < (lt, lc):
            lt, lc, rt, rc = rt, rc, lt, lc
        return Predicate(
            kind="join",
            left_table=lt,
            left_column=lc,
            right_table=rt,
            right_column=rc,
        )

    @property
    def tables(self) -> frozenset[str]:
        if self.kind == "filter":
            return frozenset((self.table,))
        return frozenset((self.left_table, self.right_table))

    def sort_key(self) -> tuple:
        if self.kind == "filter":
            return (0, self.table, self.column, self.op, repr(self.value))
        return (1, self.left_table, self.left_column, self.right_table, self.right_column)

    def to_wire(self) -> dict:
        if self.kind == "filter":
            return {
                "table": self.table,
                "column": self.column,
                "op": self.op,
                "value": self.value,
            }
        return {
            "left": f"{self.left_table}.{self.left_column}",
            "right": f"{self.right_table}.{self.right_column}",
        }

    def render(self) -> str:
        if self.kind == "filter":
            return f"{self.table}.{self.column} {self.op} {Literal(self.value).render()}"
        return (
            f"{self.left_table}.{self.left_column} = "
            f"{self.right_table}.{self.right_column}"
        )


@dataclass(frozen=True)
class QueryAst:
    query_class: QueryClass
    tables: tuple[str, ...] = ()
    # SELECT shape: select is None for '*', else explicit column refs
    select: tuple[ColumnRef, ...] | None = None
    count_star: bool = False
    where: tuple[Comparison, ...] = ()
    # INSERT shape
    insert_values: tuple[tuple, ...] = ()
    # set after bind(); sorted for determinism
    predicates: tuple[Predicate, ...] | None = None

    @property
    def bound(self) -> bool:
        return self.predicates is not None

    def is_select_like(self) -> bool:
        return self.query_class is not QueryClass.INSERT


@dataclass(frozen=True)
class ControlCommand:
    verb: ControlVerb
    args: tuple = ()


def render(ast: QueryAst) -> str:
    """Render back to SQL text; reparsing yields a structurally identical AST."""
    if ast.query_class is QueryClass.INSERT:
        rows = ", ".join(
            "(" + ", ".join(Literal(v).render() for v in row) + ")"
            for row in ast.insert_values
        )
        return f"INSERT INTO {ast.tables[0]} VALUES {rows}"
    if ast.count_star:
        items = "COUNT(*)"
    elif ast.select is None:
        items = "*"
    else:
        items = ", ".join(c.render() for c in ast.select)
    text = f"SELECT {items} FROM {', '.join(ast.tables)}"
    conds: Iterable = ast.predicates if ast.predicates is not None else ast.where
    conds = list(conds)
    if conds:
        text += " WHERE " + " AND ".join(c.render() for c in conds)
    if ast.query_class is QueryClass.EXPLAIN:
        text = "EXPLAIN " + text
    elif ast.query_class is QueryClass.EXPLAIN_ANALYZE:
        text = "EXPLAIN ANALYZE " + text
    return text


def _flip_if_needed(cmp: Comparison) -> Comparison:
    if isinstance(cmp.left, Literal) and isinstance(cmp.right, ColumnRef):
        return Comparison(cmp.right, _FLIP[cmp.op], cmp.left)
    return cmp


def bind(ast: QueryAst, catalog) -> QueryAst:
    """Resolve column refs against the catalog and normalize predicates.

    Returns a new AST with `predicates` populated (sorted, deduplicated).
    """
    if ast.query_class is QueryClass.INSERT:
        return replace(ast, predicates=())

    for t in ast.tables:
        catalog.get_table(t)  # raises TableNotFoundError

    def resolve(ref: ColumnRef) -> tuple[str, str]:
        if ref.qualifier is not None:
            if ref.qualifier not in ast.tables:
                raise UnboundColumnError(f"table {ref.qualifier!r} not in FROM list")
            table = catalog.get_table(ref.qualifier)
            if table.column_index(ref.name) is None:
                raise UnboundColumnError(f"column {ref.render()!r} does not exist")
            return ref.qualifier, ref.name
        owners = [
            t
            for t in ast.tables
            if catalog.get_table(t).column_index(ref.name) is not None
        ]
        if not owners:
            raise UnboundColumnError(f"column {ref.name!r} does not exist")
        if len(owners) > 1:
            raise UnboundColumnError(
                f"column {ref.name!r} is ambiguous across {sorted(owners)}"
            )
        return owners[0], ref.name

    def coerce(value: Any, kind: str, context: str) -> Any:
        if value is None:
            return None
        if kind == "int64":
            if isinstance(value, bool) or not isinstance(value, int):
                raise TypeMismatchError(f"{context}: expected int64 literal")
            return value
        if kind == "float64":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeMismatchError(f"{context}: expected numeric literal")
            return float(value)
        if not isinstance(value, str):
            raise TypeMismatchError(f"{context}: expected text literal")
        return value

    preds: set[Predicate] = set()
    for cmp in ast.where:
        cmp = _flip_if_needed(cmp)
        if isinstance(cmp.left, ColumnRef) and isinstance(cmp.right, ColumnRef):
            if cmp.op != "=":
                raise UnsupportedFeatureError(
                    f"only equality joins are supported, got {cmp.op!r}"
                )
            lt, lc = resolve(cmp.left)
            rt, rc = resolve(cmp.right)
            if lt == rt:
                raise UnsupportedFeatureError(
                    "column-to-column comparison within one table is not supported"
                )
            lkind = catalog.get_table(lt).column_kind(lc)
            rkind = catalog.get_table(rt).column_kind(rc)
            if lkind != rkind:
                raise TypeMismatchError(
                    f"join between {lkind} and {rkind} columns is not allowed"
                )
            preds.add(Predicate.join(lt, lc, rt, rc))
        elif isinstance(cmp.left, ColumnRef) and isinstance(cmp.right, Literal):
            t, c = resolve(cmp.left)
            kind = catalog.get_table(t).column_kind(c)
            value = coerce(cmp.right.value, kind, f"{t}.{c}")
            preds.add(Predicate.filter(t, c, cmp.op, value))
        else:
            raise UnsupportedFeatureError(
                "comparisons must reference at least one column"
            )

    resolved_select = ast.select
    if ast.select is not None:
        resolved_select = tuple(
            ColumnRef(*resolve(ref)) for ref in ast.select
        )

    return replace(
        ast,
        select=resolved_select,
        predicates=tuple(sorted(preds, key=Predicate.sort_key)),
    )


def extract_tq(ast: QueryAst) -> tuple[frozenset[str], frozenset[Predicate]]:
    """Decompose a bound SELECT into its table set and predicate set."""
    if not ast.bound:
        raise UnboundColumnError("extract_tq requires a bound query")
    return frozenset(ast.tables), frozenset(ast.predicates or ())


def filters_on(predicates: Iterable[Predicate], table: str) -> tuple[Predicate, ...]:
    return tuple(
        p for p in predicates if p.kind == "filter" and p.table == table
    )


def joins_within(
    predicates: Iterable[Predicate], tables: frozenset[str]
) -> tuple[Predicate, ...]:
    return tuple(
        p
        for p in predicates
        if p.kind == "join" and p.tables <= tables
    )


def predicates_within(
    predicates: Iterable[Predicate], tables: frozenset[str]
) -> tuple[Predicate, ...]:
    return tuple(p for p in predicates if p.tables <= tables)
