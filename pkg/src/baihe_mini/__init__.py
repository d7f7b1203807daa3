"""Mini relational engine with a hook-driven, model-steerable planner."""

from .catalog import Catalog, ColumnDef, ColumnStats, Table
from .config import EngineConfig, load_config
from .engine import Engine, Result
from .errors import EngineError
from .session import SessionState

__version__ = "0.1.0"

__all__ = [
    "Catalog",
    "ColumnDef",
    "ColumnStats",
    "Engine",
    "EngineConfig",
    "EngineError",
    "Result",
    "SessionState",
    "Table",
    "load_config",
    "__version__",
]
