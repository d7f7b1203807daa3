"""Per-session state: model variables, hint flags, and fallback counters."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .plannodes import HintSet

MODEL_VARS = (
    "baihe_ce_model",
    "baihe_cost_model",
    "baihe_steer_model",
    "baihe_runtime_model",
)

HINT_VARS = (
    "enable_hashjoin",
    "enable_nestloop",
    "enable_indexscan",
    "enable_seqscan",
)


@dataclass
class SessionState:
    worker_timeout_ms: int = 50
    hint_set: HintSet = field(default_factory=HintSet)
    model_vars: dict = field(
        default_factory=lambda: {name: None for name in MODEL_VARS}
    )
    fallbacks: Counter = field(default_factory=Counter)

    def note_fallback(self, task: str, reason: str = "") -> None:
        self.fallbacks[task] += 1

    @property
    def fallback_total(self) -> int:
        return sum(self.fallbacks.values())

    def variable(self, name: str):
        if name in self.model_vars:
            return self.model_vars[name]
        if name == "baihe_worker_timeout_ms":
            return self.worker_timeout_ms
        if name in HINT_VARS:
            return "on" if self.hint_set.to_wire()[name] else "off"
        return None
