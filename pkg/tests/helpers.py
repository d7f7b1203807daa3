"""Shared test utilities: synthetic schema, query corpus, worker fixtures."""

from __future__ import annotations

import json
import random
import textwrap
from pathlib import Path

from baihe_mini.catalog import Catalog, ColumnDef
from baihe_mini.config import EngineConfig
from baihe_mini.engine import Engine

SEED = 20240711


def make_schema(catalog: Catalog, seed: int = SEED) -> None:
    """Four-table star/chain schema with mixed column kinds."""
    rng = random.Random(seed)
    catalog.create_table(
        "a",
        [
            ColumnDef("id", "int64"),
            ColumnDef("x", "int64"),
            ColumnDef("y", "float64"),
            ColumnDef("tag", "text"),
        ],
        primary_key="id",
    )
    catalog.create_table(
        "b",
        [ColumnDef("id", "int64"), ColumnDef("a_id", "int64"), ColumnDef("v", "int64")],
        primary_key="id",
    )
    catalog.create_table(
        "c",
        [ColumnDef("id", "int64"), ColumnDef("b_id", "int64"), ColumnDef("w", "float64")],
        primary_key="id",
    )
    catalog.create_table(
        "d",
        [ColumnDef("id", "int64"), ColumnDef("a_id", "int64"), ColumnDef("z", "int64")],
        primary_key="id",
    )
    tags = ["red", "green", "blue", "gold"]
    catalog.insert_rows(
        "a",
        [
            (i, rng.randrange(10), round(rng.uniform(0, 100), 3), rng.choice(tags))
            for i in range(120)
        ],
    )
    catalog.insert_rows(
        "b", [(i, rng.randrange(120), rng.randrange(50)) for i in range(150)]
    )
    catalog.insert_rows(
        "c", [(i, rng.randrange(150), round(rng.uniform(0, 10), 3)) for i in range(100)]
    )
    catalog.insert_rows(
        "d", [(i, rng.randrange(120), rng.randrange(5)) for i in range(80)]
    )


def make_engine(data_dir: Path, **config_overrides) -> Engine:
    engine = Engine(EngineConfig(data_dir=Path(data_dir), **config_overrides))
    make_schema(engine.catalog)
    engine.analyze_all()
    return engine


def corpus_queries() -> list[str]:
    """50 SELECT statements over the synthetic schema, 1 to 4 tables."""
    single = [
        "SELECT COUNT(*) FROM a WHERE x = 3",
        "SELECT * FROM a WHERE y < 25.0",
        "SELECT a.id, a.tag FROM a WHERE tag = 'red' AND x > 5",
        "SELECT * FROM a WHERE id = 17",
        "SELECT COUNT(*) FROM a WHERE x >= 8 AND y <= 40.0",
        "SELECT * FROM b WHERE v >= 45",
        "SELECT COUNT(*) FROM b WHERE v < 5",
        "SELECT * FROM b WHERE id = 99 AND v > 1",
        "SELECT COUNT(*) FROM c WHERE w > 9.0",
        "SELECT * FROM c WHERE w <= 1.5",
        "SELECT COUNT(*) FROM d WHERE z = 2",
        "SELECT * FROM d WHERE z <> 0 AND a_id < 30",
        "SELECT COUNT(*) FROM a WHERE tag = 'blue'",
        "SELECT * FROM a WHERE x = 0 AND tag = 'gold'",
        "SELECT COUNT(*) FROM d WHERE id >= 70",
    ]
    two = [
        "SELECT COUNT(*) FROM a, b WHERE a.id = b.a_id AND a.x = 3",
        "SELECT COUNT(*) FROM a, b WHERE a.id = b.a_id AND b.v < 10",
        "SELECT a.tag, b.v FROM a, b WHERE a.id = b.a_id AND a.y > 80.0",
        "SELECT COUNT(*) FROM a, b WHERE a.id = b.a_id AND a.tag = 'red' AND b.v >= 40",
        "SELECT COUNT(*) FROM b, c WHERE b.id = c.b_id AND b.v = 7",
        "SELECT COUNT(*) FROM b, c WHERE b.id = c.b_id AND c.w < 2.0",
        "SELECT b.id, c.w FROM b, c WHERE b.id = c.b_id AND c.w > 8.5 AND b.v > 25",
        "SELECT COUNT(*) FROM a, d WHERE a.id = d.a_id AND d.z = 1",
        "SELECT COUNT(*) FROM a, d WHERE a.id = d.a_id AND a.x < 2",
        "SELECT a.id, d.z FROM a, d WHERE a.id = d.a_id AND a.tag = 'green' AND d.z > 2",
        "SELECT COUNT(*) FROM a, b WHERE a.id = b.a_id AND a.id = 55",
        "SELECT COUNT(*) FROM b, c WHERE b.id = c.b_id AND b.a_id = 10",
        "SELECT COUNT(*) FROM a, d WHERE a.id = d.a_id AND a.y <= 15.0 AND d.z <= 1",
        "SELECT COUNT(*) FROM a, b WHERE a.id = b.a_id AND b.v <> 20 AND a.x = 9",
        "SELECT COUNT(*) FROM b, c WHERE b.id = c.b_id AND b.v >= 35 AND c.w >= 5.0",
        "SELECT COUNT(*) FROM a, d WHERE a.id = d.a_id AND d.id < 20",
        "SELECT COUNT(*) FROM a, b WHERE a.id = b.a_id AND a.tag = 'gold' AND a.x <= 4",
        "SELECT COUNT(*) FROM b, c WHERE b.id = c.b_id AND c.id >= 60 AND b.v < 30",
    ]
    three = [
        "SELECT COUNT(*) FROM a, b, c WHERE a.id = b.a_id AND b.id = c.b_id AND a.x = 4",
        "SELECT COUNT(*) FROM a, b, c WHERE a.id = b.a_id AND b.id = c.b_id AND c.w < 3.0 AND a.tag = 'red'",
        "SELECT COUNT(*) FROM a, b, c WHERE a.id = b.a_id AND b.id = c.b_id AND b.v > 40",
        "SELECT COUNT(*) FROM a, b, c WHERE a.id = b.a_id AND b.id = c.b_id AND a.y > 90.0 AND b.v < 25",
        "SELECT COUNT(*) FROM d, a, b WHERE d.a_id = a.id AND a.id = b.a_id AND d.z = 0",
        "SELECT COUNT(*) FROM d, a, b WHERE d.a_id = a.id AND a.id = b.a_id AND a.x >= 7 AND b.v <= 10",
        "SELECT COUNT(*) FROM d, a, b WHERE d.a_id = a.id AND a.id = b.a_id AND d.z > 3 AND a.tag = 'blue'",
        "SELECT COUNT(*) FROM a, b, d WHERE a.id = b.a_id AND a.id = d.a_id AND b.v = 11",
        "SELECT COUNT(*) FROM a, b, c WHERE a.id = b.a_id AND b.id = c.b_id AND a.id = 23",
        "SELECT COUNT(*) FROM a, b, c WHERE a.id = b.a_id AND b.id = c.b_id AND c.w >= 9.5",
        "SELECT COUNT(*) FROM d, a, b WHERE d.a_id = a.id AND a.id = b.a_id AND d.id = 42 AND b.v < 35",
        "SELECT COUNT(*) FROM a, b, d WHERE a.id = b.a_id AND a.id = d.a_id AND a.x = 1 AND d.z = 4",
    ]
    four = [
        "SELECT COUNT(*) FROM a, b, c, d WHERE a.id = b.a_id AND b.id = c.b_id AND a.id = d.a_id AND a.x = 5 AND d.z = 1",
        "SELECT COUNT(*) FROM a, b, c, d WHERE a.id = b.a_id AND b.id = c.b_id AND a.id = d.a_id AND c.w < 2.5 AND d.z = 3",
        "SELECT COUNT(*) FROM a, b, c, d WHERE a.id = b.a_id AND b.id = c.b_id AND a.id = d.a_id AND a.tag = 'green' AND b.v > 30",
        "SELECT COUNT(*) FROM a, b, c, d WHERE a.id = b.a_id AND b.id = c.b_id AND a.id = d.a_id AND a.y < 20.0 AND c.w > 5.0",
        "SELECT COUNT(*) FROM a, b, c, d WHERE a.id = b.a_id AND b.id = c.b_id AND a.id = d.a_id AND a.id = 77",
    ]
    queries = single + two + three + four
    assert len(queries) == 50
    return queries


# --- worker fixtures -----------------------------------------------------------

_LOOP = """

def main():
    sys.stdout.write(json.dumps({"hello": NAME, "protocol_version": 1, "tasks": [TASK]}) + "\\n")
    sys.stdout.flush()
    for line in sys.stdin:
        if not line.strip():
            continue
        req = json.loads(line)
        if req.get("shutdown"):
            return
        out = respond(req)
        if out is None:
            continue
        sys.stdout.write(out if isinstance(out, str) else json.dumps(out))
        sys.stdout.write("\\n")
        sys.stdout.flush()


if __name__ == "__main__":
    main()
"""


def make_worker_dir(
    base: Path,
    name: str,
    task: str,
    body: str,
    files: dict | None = None,
    loop: bool = True,
) -> Path:
    """Write an executable protocol-v1 worker script plus manifest."""
    model_dir = Path(base) / name
    model_dir.mkdir(parents=True, exist_ok=True)
    script = "#!/usr/bin/env python3\nimport json, os, sys, time\n\n"
    script += f"NAME = {name!r}\nTASK = {task!r}\n\n"
    script += textwrap.dedent(body)
    if loop:
        script += _LOOP
    entry = model_dir / "worker.py"
    entry.write_text(script)
    entry.chmod(0o755)
    (model_dir / "manifest").write_text(
        json.dumps(
            {"name": name, "task": task, "entry": "worker.py", "protocol_version": 1}
        )
    )
    for fname, content in (files or {}).items():
        payload = content if isinstance(content, str) else json.dumps(content)
        (model_dir / fname).write_text(payload)
    return model_dir


CONST_CARDEST = """
def respond(req):
    return {"id": req["id"], "ok": True, "result": {"selectivity": 0.5}}
"""

ORACLE_CARDEST = """
with open("selectivities.json") as fh:
    TABLE = json.load(fh)

def respond(req):
    key = json.dumps(req["payload"], sort_keys=True)
    if key not in TABLE:
        return {"id": req["id"], "ok": False, "error": "unknown subquery"}
    return {"id": req["id"], "ok": True, "result": {"selectivity": TABLE[key]}}
"""

SLEEPER_CARDEST = """
def respond(req):
    time.sleep(req.get("deadline_ms", 50) * 10 / 1000.0)
    return {"id": req["id"], "ok": True, "result": {"selectivity": 0.5}}
"""

CRASHER_CARDEST = """
def respond(req):
    os._exit(1)
"""

GARBAGE_CARDEST = """
def respond(req):
    return "%%% this is not json %%%"
"""

OUT_OF_RANGE_CARDEST = """
def respond(req):
    return {"id": req["id"], "ok": True, "result": {"selectivity": 7.5}}
"""

LAGGARD_CARDEST = """
SEEN = {"count": 0}

def respond(req):
    SEEN["count"] += 1
    if SEEN["count"] == 1:
        time.sleep(req.get("deadline_ms", 50) * 3 / 1000.0)
    return {"id": req["id"], "ok": True, "result": {"selectivity": 0.25}}
"""

FUZZ_CARDEST = """
def respond(req):
    mode = req["id"] % 5
    if mode == 0:
        return {"id": req["id"] + 100000, "ok": True, "result": {"selectivity": 0.5}}
    if mode == 1:
        return '{"id": %d, "ok": tru' % req["id"]
    if mode == 2:
        return "x" * (1024 * 1024 + 64)
    if mode == 3:
        return {"id": req["id"], "ok": False, "error": "fuzz says no"}
    return {"id": req["id"], "ok": True, "result": {"selectivity": 0.5}}
"""

CONST_COST = """
def respond(req):
    return {"id": req["id"], "ok": True, "result": {"cost": 42.0}}
"""

CONST_RUNTIME = """
def respond(req):
    return {"id": req["id"], "ok": True, "result": {"latency_ms": 12.5}}
"""

ORACLE_STEER = """
with open("runtimes.json") as fh:
    TABLE = json.load(fh)

def respond(req):
    key = json.dumps(req["payload"]["query"], sort_keys=True)
    runtimes = TABLE.get(key)
    if runtimes is None:
        return {"id": req["id"], "ok": False, "error": "unknown query"}
    best = min(range(len(runtimes)), key=lambda i: (runtimes[i], i))
    return {"id": req["id"], "ok": True, "result": {"choice": best}}
"""

STEER_CHOICE_0 = """
def respond(req):
    return {"id": req["id"], "ok": True, "result": {"choice": 0}}
"""

EXIT_NOW = """
def respond(req):
    return None

sys.exit(3)
"""

NEVER_HANDSHAKE = """
def respond(req):
    return None

time.sleep(600)
"""
