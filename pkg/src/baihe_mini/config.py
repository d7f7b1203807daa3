"""Engine configuration: key = value file, flags, and environment fallback.

Resolution order for data_dir: --data-dir flag, config file, BAIHE_DATA_DIR
environment variable, then ./baihe_data. Cost constants and the hint-set
family are fixed at engine start.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path

from .costing import CostConstants
from .plannodes import DEFAULT_HINT_FAMILY, NAMED_HINT_SETS

ENV_DATA_DIR = "BAIHE_DATA_DIR"
DEFAULT_DATA_DIR = "baihe_data"

_BOOL_WORDS = {
    "on": True,
    "off": False,
    "true": True,
    "false": False,
    "1": True,
    "0": False,
    "yes": True,
    "no": False,
}


def parse_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    word = str(value).strip().lower()
    if word not in _BOOL_WORDS:
        raise ValueError(f"{value!r} is not a boolean")
    return _BOOL_WORDS[word]


@dataclass
class EngineConfig:
    data_dir: Path = Path(DEFAULT_DATA_DIR)
    worker_timeout_ms: int = 50
    startup_timeout_ms: int = 2000
    allow_cross_products: bool = False
    collector_buffer_cap: int = 10_000
    histogram_buckets: int = 32
    mcv_limit: int = 8
    seq_page_cost: float = 1.0
    cpu_tuple_cost: float = 0.01
    cpu_operator_cost: float = 0.0025
    index_page_cost: float = 0.5
    hash_build_cost_per_row: float = 0.02
    hint_set_family: tuple = DEFAULT_HINT_FAMILY

    def cost_constants(self) -> CostConstants:
        return CostConstants(
            seq_page_cost=self.seq_page_cost,
            cpu_tuple_cost=self.cpu_tuple_cost,
            cpu_operator_cost=self.cpu_operator_cost,
            index_page_cost=self.index_page_cost,
            hash_build_cost_per_row=self.hash_build_cost_per_row,
        )


_INT_KEYS = (
    "worker_timeout_ms",
    "startup_timeout_ms",
    "collector_buffer_cap",
    "histogram_buckets",
    "mcv_limit",
)
_FLOAT_KEYS = (
    "seq_page_cost",
    "cpu_tuple_cost",
    "cpu_operator_cost",
    "index_page_cost",
    "hash_build_cost_per_row",
)


def read_config_file(path: str | Path) -> dict:
    """Parse `key = value` lines; '#' starts a comment."""
    values: dict = {}
    known = {f.name for f in fields(EngineConfig)}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            key = key.strip().lower()
            value = value.strip()
            if key not in known:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = value
    return values


def _coerce(key: str, value):
    if key == "data_dir":
        return Path(value)
    if key in _INT_KEYS:
        return int(value)
    if key in _FLOAT_KEYS:
        return float(value)
    if key == "allow_cross_products":
        return parse_bool(value)
    if key == "hint_set_family":
        names = tuple(
            name.strip() for name in str(value).split(",") if name.strip()
        )
        unknown = [n for n in names if n not in NAMED_HINT_SETS]
        if unknown:
            raise ValueError(f"unknown hint sets {unknown}")
        if not names:
            raise ValueError("hint_set_family must not be empty")
        return names
    return value


def load_config(
    config_path: str | Path | None = None,
    data_dir: str | Path | None = None,
    env: dict | None = None,
) -> EngineConfig:
    env = os.environ if env is None else env
    config = EngineConfig()
    file_values = read_config_file(config_path) if config_path is not None else {}
    for key, value in file_values.items():
        setattr(config, key, _coerce(key, value))
    if "data_dir" not in file_values and env.get(ENV_DATA_DIR):
        config.data_dir = Path(env[ENV_DATA_DIR])
    if data_dir is not None:
        config.data_dir = Path(data_dir)
    if config.worker_timeout_ms <= 0 or config.startup_timeout_ms <= 0:
        raise ValueError("timeouts must be positive")
    return config
