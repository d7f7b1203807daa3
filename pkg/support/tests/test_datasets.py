import json
import random

import pytest

from baihe_support.datasets import (
    DatasetError,
    SchemaVersionError,
    dataset_path,
    fetch_dataset,
)
from conftest import collect_workload, window_query


def test_fetch_missing_file(tmp_path):
    with pytest.raises(DatasetError):
        fetch_dataset(tmp_path, "nope", 1)


def test_fetch_wrong_version(points_engine):
    rng = random.Random(1)
    collect_workload(points_engine, [window_query(rng) for _ in range(3)], "dsv")
    fetch_dataset(points_engine.data_dir, "dsv", 1)  # v1 exists
    with pytest.raises(DatasetError):
        fetch_dataset(points_engine.data_dir, "dsv", 2)


def test_fetch_schema_mismatch(tmp_path):
    path = dataset_path(tmp_path, "bad", 1)
    path.parent.mkdir(parents=True)
    path.write_text(json.dumps({"schema": 2, "dataset_id": "bad", "version": 1}) + "\n")
    with pytest.raises(SchemaVersionError):
        fetch_dataset(tmp_path, "bad", 1)


def test_frame_counts_records(points_engine):
    rng = random.Random(2)
    queries = [window_query(rng) for _ in range(40)]
    collect_workload(points_engine, queries, "ds40")
    frame = fetch_dataset(points_engine.data_dir, "ds40", 1)
    assert len(frame) == 40
    assert len(frame.query_texts()) == 40


def test_cardest_rows_match_true_counts(points_engine):
    # derived cardinalities must equal the actual rows the engine measured,
    # which for these single-table queries is the exact predicate count
    rng = random.Random(3)
    queries = [window_query(rng) for _ in range(10)]
    collect_workload(points_engine, queries, "dsx")
    frame = fetch_dataset(points_engine.data_dir, "dsx", 1)
    rows = frame.cardest_rows()
    assert len(rows) == 10  # one scan node per single-table query
    table = points_engine.catalog.get_table("pts")
    for row in rows:
        assert row.tables == ("pts",)
        assert row.table_rows_product == table.row_count
        matched = 0
        for x, y in table.rows:
            ok = True
            for _, column, op, value in row.filters:
                v = x if column == "x" else y
                if op == ">=" and not v >= value:
                    ok = False
                elif op == "<=" and not v <= value:
                    ok = False
            if ok:
                matched += 1
        assert row.cardinality == matched
        assert 0.0 <= row.selectivity <= 1.0


def test_node_level_expansion_multi_table(tmp_path):
    from baihe_mini.catalog import ColumnDef
    from baihe_mini.config import EngineConfig
    from baihe_mini.engine import Engine

    engine = Engine(EngineConfig(data_dir=tmp_path / "data"))
    engine.catalog.create_table("t1", [ColumnDef("k", "int64")])
    engine.catalog.create_table("t2", [ColumnDef("k", "int64"), ColumnDef("m", "int64")])
    engine.catalog.create_table("t3", [ColumnDef("m", "int64")])
    engine.catalog.insert_rows("t1", [(i,) for i in range(20)])
    engine.catalog.insert_rows("t2", [(i % 20, i % 7) for i in range(30)])
    engine.catalog.insert_rows("t3", [(i % 7,) for i in range(15)])
    engine.analyze_all()
    session = engine.create_session()
    engine.collectors.define_collector("c", ("t1", "t2", "t3"), ("SELECT",))
    engine.collectors.start_collector("c", "ds", "sink")
    engine.execute(
        session,
        "SELECT COUNT(*) FROM t1, t2, t3 WHERE t1.k = t2.k AND t2.m = t3.m",
    )
    engine.collectors.stop_collector("ds")
    frame = fetch_dataset(engine.data_dir, "ds", 1)
    cost_rows = frame.cost_rows()
    assert len(cost_rows) == 5  # 3 scans + 2 joins
    card_rows = frame.cardest_rows()
    assert len(card_rows) == 5
    subquery_sizes = sorted(len(r.tables) for r in card_rows)
    assert subquery_sizes == [1, 1, 1, 2, 3]
    # the top row carries the full query cardinality
    from baihe_mini.sqlast import Predicate

    top = next(r for r in card_rows if len(r.tables) == 3)
    truth = engine.catalog.true_cardinality(
        ("t1", "t2", "t3"),
        [Predicate.join("t1", "k", "t2", "k"), Predicate.join("t2", "m", "t3", "m")],
    )
    assert top.cardinality == truth
    engine.close()


def test_cost_rows_have_feature_record(points_engine):
    rng = random.Random(4)
    collect_workload(points_engine, [window_query(rng) for _ in range(5)], "dsc")
    frame = fetch_dataset(points_engine.data_dir, "dsc", 1)
    for row in frame.cost_rows():
        assert row.features["node_type"] == "SeqScan"
        assert row.features["rows_in"] == 2000.0
        assert row.features["pages"] == 20.0
        assert row.features["qual_count"] == 4
        assert row.wall_time_ms > 0
