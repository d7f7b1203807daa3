import random

import pytest

from baihe_mini.catalog import ColumnDef
from baihe_mini.config import EngineConfig
from baihe_mini.engine import Engine

ROWS = 2000
X_RANGE = 200
NOISE = 8


def make_points_engine(data_dir, rows=ROWS, seed=99) -> Engine:
    """Engine with a two-column correlated table pts(x, y): y = x + noise.

    Worker startup timeout is widened: packaged sklearn models pay the
    sklearn import when their worker boots.
    """
    engine = Engine(EngineConfig(data_dir=data_dir, startup_timeout_ms=20_000))
    rng = random.Random(seed)
    engine.catalog.create_table(
        "pts", [ColumnDef("x", "int64"), ColumnDef("y", "int64")]
    )
    engine.catalog.insert_rows(
        "pts",
        [
            (x, x + rng.randint(-NOISE, NOISE))
            for x in (rng.randrange(X_RANGE) for _ in range(rows))
        ],
    )
    engine.catalog.analyze("pts")
    return engine


def window_query(rng, width_lo=10, width_hi=60) -> str:
    a = rng.randrange(X_RANGE - width_hi)
    b = a + rng.randrange(width_lo, width_hi)
    c = max(0, a - rng.randint(-NOISE, NOISE))
    d = c + rng.randrange(width_lo, width_hi)
    return (
        f"SELECT COUNT(*) FROM pts WHERE x >= {a} AND x <= {b} "
        f"AND y >= {c} AND y <= {d}"
    )


def collect_workload(engine, queries, dataset_id="ds", collector="c", sink="tbl_sink"):
    """Run queries under a collector; returns the dataset version."""
    session = engine.create_session()
    if collector not in engine.collectors.collectors:
        engine.collectors.define_collector(collector, ("pts",), ("SELECT",))
    version = engine.collectors.start_collector(collector, dataset_id, sink)
    for text in queries:
        engine.execute(session, text)
    engine.collectors.stop_collector(dataset_id)
    return version


@pytest.fixture
def points_engine(tmp_path):
    engine = make_points_engine(tmp_path / "data")
    yield engine
    engine.close()
