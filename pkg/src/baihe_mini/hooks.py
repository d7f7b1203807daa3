"""Hook points the planner consults before falling back to builtin behavior.

Every hook returns a HookOutcome: either a value supplied by a provider
(typically a model worker) or a fallback marker. A fallback never aborts
planning; the planner substitutes its builtin estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Iterable

from .sqlast import Predicate


@dataclass(frozen=True)
class HookOutcome:
    ok: bool
    payload: Any = None
    reason: str = ""

    @staticmethod
    def value(payload: Any) -> "HookOutcome":
        return HookOutcome(ok=True, payload=payload)

    @staticmethod
    def fallback(reason: str) -> "HookOutcome":
        return HookOutcome(ok=False, reason=reason)


def valid_selectivity(x: Any) -> bool:
    return (
        isinstance(x, (int, float))
        and not isinstance(x, bool)
        and math.isfinite(x)
        and 0.0 <= x <= 1.0
    )


def valid_cost(x: Any) -> bool:
    return (
        isinstance(x, (int, float))
        and not isinstance(x, bool)
        and math.isfinite(x)
        and x >= 0.0
    )


def valid_latency(x: Any) -> bool:
    return valid_cost(x)


def cardest_payload(tables: Iterable[str], predicates: Iterable[Predicate]) -> dict:
    """Canonical (T, Q) wire payload; lists are sorted so equal inputs
    serialize identically on both sides of the worker protocol."""
    preds = sorted(predicates, key=Predicate.sort_key)
    return {
        "tables": sorted(tables),
        "filters": [p.to_wire() for p in preds if p.kind == "filter"],
        "joins": [p.to_wire() for p in preds if p.kind == "join"],
    }


def cost_payload(node_type: str, features: dict) -> dict:
    return {
        "node_type": node_type,
        "rows_in": features.get("rows_in", 0.0),
        "rows_out": features.get("rows_out", 0.0),
        "pages": features.get("pages", 0.0),
        "qual_count": features.get("qual_count", 0),
        "outer_rows": features.get("outer_rows", 0.0),
        "inner_rows": features.get("inner_rows", 0.0),
    }


class HookProvider:
    """Interface the planner calls; the default implementation always falls
    back, which yields builtin-only planning."""

    def table_selectivity(
        self, table: str, filters: tuple[Predicate, ...]
    ) -> HookOutcome:
        return HookOutcome.fallback("no model")

    def join_selectivity(
        self, tables: frozenset[str], predicates: tuple[Predicate, ...]
    ) -> HookOutcome:
        return HookOutcome.fallback("no model")

    def node_cost(self, node_type: str, features: dict) -> HookOutcome:
        return HookOutcome.fallback("no model")

    def steer(self, query: dict, candidates: list[dict]) -> HookOutcome:
        return HookOutcome.fallback("no model")

    def note_rejected(self, task: str, reason: str) -> None:
        """Called by the planner when it rejects a hook value (out of range,
        malformed directive, ...); providers may account it per model."""


NULL_HOOKS = HookProvider()


class FunctionHooks(HookProvider):
    """In-process provider backed by plain callables over wire payloads.

    Used for parameterizing the planner directly by a function, e.g. a true-
    selectivity oracle; receives exactly the payloads a worker would see.
    """

    def __init__(
        self,
        cardest: Callable[[dict], Any] | None = None,
        cost: Callable[[dict], Any] | None = None,
        steer: Callable[[dict, list[dict]], Any] | None = None,
    ):
        self._cardest = cardest
        self._cost = cost
        self._steer = steer

    def table_selectivity(self, table, filters):
        if self._cardest is None:
            return HookOutcome.fallback("no model")
        return HookOutcome.value(self._cardest(cardest_payload([table], filters)))

    def join_selectivity(self, tables, predicates):
        if self._cardest is None:
            return HookOutcome.fallback("no model")
        return HookOutcome.value(self._cardest(cardest_payload(tables, predicates)))

    def node_cost(self, node_type, features):
        if self._cost is None:
            return HookOutcome.fallback("no model")
        return HookOutcome.value(self._cost(cost_payload(node_type, features)))

    def steer(self, query, candidates):
        if self._steer is None:
            return HookOutcome.fallback("no model")
        return HookOutcome.value(self._steer(query, candidates))
