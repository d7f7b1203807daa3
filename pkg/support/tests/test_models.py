import random
import statistics

import pytest

from baihe_support.datasets import fetch_dataset
from baihe_support.features import FeatureSchema, hint_set_vector
from baihe_support.models import (
    DegenerateFrameError,
    EmptyFrameError,
    SteeringFrame,
    SteeringRow,
    train_cardest,
    train_cost,
    train_histogram_product,
    train_steering,
)
from conftest import collect_workload, window_query


def trained_cardest(points_engine, n_queries=80, seed=7):
    rng = random.Random(seed)
    queries = [window_query(rng) for _ in range(n_queries)]
    collect_workload(points_engine, queries, "train")
    frame = fetch_dataset(points_engine.data_dir, "train", 1)
    return train_cardest(frame), frame


def payload_for(a, b, c, d):
    return {
        "tables": ["pts"],
        "filters": [
            {"table": "pts", "column": "x", "op": ">=", "value": a},
            {"table": "pts", "column": "x", "op": "<=", "value": b},
            {"table": "pts", "column": "y", "op": ">=", "value": c},
            {"table": "pts", "column": "y", "op": "<=", "value": d},
        ],
        "joins": [],
    }


# --- cardinality ------------------------------------------------------------------


def test_cardest_predictions_clipped(points_engine):
    model, _ = trained_cardest(points_engine)
    rng = random.Random(17)
    for _ in range(50):
        a = rng.randrange(150)
        payload = payload_for(a, a + rng.randrange(5, 80), a - 5, a + 60)
        sel = model.predict_selectivity(payload)
        assert 0.0 <= sel <= 1.0


def test_cardest_learns_correlation(points_engine):
    # held-out q-error must beat the per-column independence product
    model, _ = trained_cardest(points_engine, n_queries=150)
    catalog = points_engine.catalog
    table = catalog.get_table("pts")
    rng = random.Random(23)
    from baihe_mini.costing import baseline_selectivity
    from baihe_mini.parser import parse
    from baihe_mini.sqlast import bind, extract_tq

    model_q, base_q = [], []
    for _ in range(40):
        text = window_query(rng)
        ast = bind(parse(text), catalog)
        tables, preds = extract_tq(ast)
        truth = max(1, catalog.true_cardinality(tables, preds))
        filters = sorted(
            (
                {"table": p.table, "column": p.column, "op": p.op, "value": p.value}
                for p in preds
            ),
            key=lambda f: (f["table"], f["column"], f["op"], repr(f["value"])),
        )
        payload = {"tables": ["pts"], "filters": filters, "joins": []}
        est_model = max(1.0, model.predict_selectivity(payload) * table.row_count)
        est_base = max(1.0, baseline_selectivity(table, preds) * table.row_count)
        model_q.append(max(est_model / truth, truth / est_model))
        base_q.append(max(est_base / truth, truth / est_base))
    assert statistics.median(model_q) < statistics.median(base_q)


def test_cardest_single_record_constant(points_engine):
    collect_workload(points_engine, [window_query(random.Random(5))], "one")
    frame = fetch_dataset(points_engine.data_dir, "one", 1)
    model = train_cardest(frame)
    p1 = payload_for(0, 50, 0, 50)
    p2 = payload_for(100, 180, 90, 170)
    assert model.predict_selectivity(p1) == model.predict_selectivity(p2)


def test_cardest_empty_frame(points_engine):
    from baihe_support.datasets import TrainingFrame

    with pytest.raises(EmptyFrameError):
        train_cardest(TrainingFrame(dataset_id="x", version=1, records=[]))


# --- cost ---------------------------------------------------------------------------


def test_cost_model_nonnegative(points_engine):
    rng = random.Random(11)
    collect_workload(points_engine, [window_query(rng) for _ in range(30)], "costs")
    frame = fetch_dataset(points_engine.data_dir, "costs", 1)
    model = train_cost(frame)
    result = model.serve(
        {
            "node_type": "SeqScan",
            "rows_in": 2000,
            "rows_out": 100,
            "pages": 20,
            "qual_count": 4,
            "outer_rows": 0,
            "inner_rows": 0,
        }
    )
    assert result["cost"] >= 0.0


# --- steering ------------------------------------------------------------------------


def hint(name):
    base = {
        "enable_hashjoin": True,
        "enable_nestloop": True,
        "enable_indexscan": True,
        "enable_seqscan": True,
    }
    if name == "no_hashjoin":
        base["enable_hashjoin"] = False
    if name == "no_nestloop":
        base["enable_nestloop"] = False
    return base


def steering_frame(n_queries=12, hints=("all", "no_hashjoin", "no_nestloop"), seed=3):
    rng = random.Random(seed)
    rows = []
    for q in range(n_queries):
        payload = payload_for(q * 10, q * 10 + 30, q * 10 - 5, q * 10 + 25)
        latencies = [rng.uniform(1.0, 50.0) for _ in hints]
        for name, latency in zip(hints, latencies):
            rows.append(
                SteeringRow(
                    query_text=f"q{q}",
                    query_payload=payload,
                    hint_set=hint(name),
                    est_cost=rng.uniform(10.0, 500.0),
                    latency_ms=latency,
                )
            )
    return SteeringFrame(rows=rows)


def test_steering_replay_matches_true_argmin():
    frame = steering_frame()
    model = train_steering(frame)
    by_query = {}
    for row in frame.rows:
        by_query.setdefault(row.query_text, []).append(row)
    for text, rows in by_query.items():
        candidates = [
            {"hint_set": r.hint_set, "est_cost": r.est_cost, "est_rows": 0.0}
            for r in rows
        ]
        result = model.serve(
            {"query": rows[0].query_payload, "candidates": candidates}
        )
        true_best = min(
            range(len(rows)), key=lambda i: (rows[i].latency_ms, i)
        )
        assert result["choice"] == true_best, text


def test_steering_single_hint_set_rejected():
    frame = steering_frame(hints=("all",))
    with pytest.raises(DegenerateFrameError):
        train_steering(frame)


def test_steering_empty_frame():
    with pytest.raises(EmptyFrameError):
        train_steering(SteeringFrame(rows=[]))


def test_steering_tie_breaks_to_lowest_index():
    # two identical candidates: identical feature vectors predict the same
    # latency, and argmin must take the first
    frame = steering_frame()
    model = train_steering(frame)
    row = frame.rows[0]
    candidate = {"hint_set": row.hint_set, "est_cost": row.est_cost, "est_rows": 0.0}
    result = model.serve(
        {"query": row.query_payload, "candidates": [candidate, dict(candidate)]}
    )
    assert result["choice"] == 0


# --- data-driven histogram product ---------------------------------------------------


def test_histogram_product_from_csv(points_engine, tmp_path):
    csv_path = tmp_path / "pts.csv"
    points_engine.catalog.export_csv("pts", csv_path)
    model = train_histogram_product("pts", csv_path, [("x", "int64"), ("y", "int64")])
    sel = model.predict_selectivity(payload_for(0, 99, -10, 120))
    # x in [0, 99] covers about half the uniform x range
    assert 0.3 <= sel <= 0.7
    assert model.predict_selectivity(payload_for(0, 1000, -100, 1000)) == 1.0
    eq = model.predict_selectivity(
        {
            "tables": ["pts"],
            "filters": [{"table": "pts", "column": "x", "op": "=", "value": 5}],
            "joins": [],
        }
    )
    assert 0.0 <= eq <= 1.0


def test_feature_schema_roundtrip():
    payloads = [payload_for(0, 10, 0, 10), payload_for(5, 80, 5, 90)]
    schema = FeatureSchema.from_payloads(payloads)
    clone = FeatureSchema.from_dict(schema.to_dict())
    assert clone.vector(payloads[0]) == schema.vector(payloads[0])
    assert len(schema.vector(payloads[0])) == schema.width


def test_hint_set_vector():
    assert hint_set_vector(hint("all")) == [1.0, 1.0, 1.0, 1.0]
    assert hint_set_vector(hint("no_hashjoin")) == [0.0, 1.0, 1.0, 1.0]
