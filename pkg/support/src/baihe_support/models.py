"""Reference model trainers: query-driven cardinality, node-level cost,
hint-set steering, and a data-driven histogram-product estimator.

These are deliberately simple stand-ins; every trained object implements
serve(payload) -> result for the matching worker task, so packaging is
uniform. Selectivity outputs are clipped to [0, 1].
"""

from __future__ import annotations

import csv
import json
from bisect import bisect_right
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datasets import TrainingFrame, fetch_dataset
from .features import FeatureSchema, hint_set_vector

NODE_TYPES = ("SeqScan", "IndexScan", "NestLoopJoin", "HashJoin")


class EmptyFrameError(Exception):
    pass


class DegenerateFrameError(Exception):
    pass


def _regressor(n_rows: int):
    # imported lazily so sklearn-free models (histogram product) unpickle
    # without paying the sklearn import in their worker process
    from sklearn.dummy import DummyRegressor
    from sklearn.ensemble import GradientBoostingRegressor

    if n_rows < 5:
        return DummyRegressor(strategy="mean")
    return GradientBoostingRegressor(random_state=0)


# --- cardinality (query-driven) ------------------------------------------------


@dataclass
class CardestModel:
    task = "CARDEST"
    schema: FeatureSchema
    regressor: object

    def predict_selectivity(self, payload: dict) -> float:
        x = np.asarray([self.schema.vector(payload)])
        value = float(self.regressor.predict(x)[0])
        return min(1.0, max(0.0, value))

    def serve(self, payload: dict) -> dict:
        return {"selectivity": self.predict_selectivity(payload)}


def train_cardest(frame: TrainingFrame) -> CardestModel:
    """Regressor from predicate features to selectivity, clipped to [0, 1]."""
    rows = frame.cardest_rows()
    if not rows:
        raise EmptyFrameError("no cardinality training rows in frame")
    payloads = [r.payload() for r in rows]
    schema = FeatureSchema.from_payloads(payloads)
    x = np.asarray([schema.vector(p) for p in payloads])
    y = np.asarray([r.selectivity for r in rows])
    regressor = _regressor(len(rows)).fit(x, y)
    return CardestModel(schema=schema, regressor=regressor)


# --- cost ------------------------------------------------------------------------


@dataclass
class CostModel:
    task = "COST"
    feature_names: tuple
    scale: list
    regressor: object

    def _vector(self, features: dict) -> list[float]:
        out = [1.0 if features.get("node_type") == t else 0.0 for t in NODE_TYPES]
        for i, name in enumerate(self.feature_names):
            out.append(float(features.get(name, 0.0)) / self.scale[i])
        return out

    def serve(self, payload: dict) -> dict:
        x = np.asarray([self._vector(payload)])
        return {"cost": max(0.0, float(self.regressor.predict(x)[0]))}


_COST_FEATURES = ("rows_in", "rows_out", "pages", "qual_count", "outer_rows", "inner_rows")


def train_cost(frame: TrainingFrame) -> CostModel:
    """Node-level latency regressor over the COST feature record; the
    predicted wall milliseconds act as the cost unit."""
    rows = frame.cost_rows()
    if not rows:
        raise EmptyFrameError("no cost training rows in frame")
    scale = [
        max(1.0, max(float(r.features.get(name, 0.0)) for r in rows))
        for name in _COST_FEATURES
    ]
    model = CostModel(
        feature_names=_COST_FEATURES,
        scale=scale,
        regressor=_regressor(len(rows)),
    )
    x = np.asarray([model._vector(r.features) for r in rows])
    y = np.asarray([r.wall_time_ms for r in rows])
    model.regressor = model.regressor.fit(x, y)
    return model


# --- steering ----------------------------------------------------------------------


@dataclass(frozen=True)
class SteeringRow:
    query_text: str
    query_payload: dict
    hint_set: dict
    est_cost: float
    latency_ms: float


@dataclass
class SteeringFrame:
    rows: list[SteeringRow] = field(default_factory=list)

    def hint_sets_per_query(self) -> dict:
        seen: dict[str, set] = {}
        for row in self.rows:
            key = json.dumps(row.hint_set, sort_keys=True)
            seen.setdefault(row.query_text, set()).add(key)
        return {q: len(s) for q, s in seen.items()}


def build_steering_frame(data_dir, runs) -> SteeringFrame:
    """Assemble per-hint-set runtime rows from one dataset per hint set.

    runs: iterable of (dataset_id, version, hint_set dict); every dataset
    must have been collected with that hint set active.
    """
    rows: list[SteeringRow] = []
    for dataset_id, version, hint_set in runs:
        frame = fetch_dataset(data_dir, dataset_id, version)
        for record in frame.records:
            plan = record.get("plan")
            if not plan or "total_time_ns" not in record:
                continue
            payload = _plan_query_payload(plan)
            rows.append(
                SteeringRow(
                    query_text=record.get("query_text", json.dumps(payload, sort_keys=True)),
                    query_payload=payload,
                    hint_set=dict(hint_set),
                    est_cost=float(record.get("est_cost", 0.0)),
                    latency_ms=record["total_time_ns"] / 1e6,
                )
            )
    return SteeringFrame(rows=rows)


def _plan_query_payload(plan: dict) -> dict:
    from .datasets import _subtree_query

    tables, filters, joins, _ = _subtree_query(plan)
    return {
        "tables": sorted(tables),
        "filters": [
            {"table": t, "column": c, "op": op, "value": v}
            for t, c, op, v in sorted(filters, key=lambda f: (f[0], f[1], f[2], repr(f[3])))
        ],
        "joins": [{"left": a, "right": b} for a, b in sorted(joins)],
    }


@dataclass
class SteeringModel:
    task = "STEER"
    schema: FeatureSchema
    cost_scale: float
    regressor: object

    def _vector(self, query_payload: dict, hint_set: dict, est_cost: float) -> list[float]:
        return (
            self.schema.vector(query_payload)
            + hint_set_vector(hint_set)
            + [float(est_cost) / self.cost_scale]
        )

    def predict_latencies(self, query_payload: dict, candidates) -> list[float]:
        x = np.asarray(
            [
                self._vector(query_payload, c.get("hint_set", {}), c.get("est_cost", 0.0))
                for c in candidates
            ]
        )
        return [float(v) for v in self.regressor.predict(x)]

    def serve(self, payload: dict) -> dict:
        predictions = self.predict_latencies(payload["query"], payload["candidates"])
        # ties break to the lowest candidate index
        return {"choice": int(np.argmin(predictions))}


def train_steering(frame: SteeringFrame) -> SteeringModel:
    """Latency predictor over (query features, hint set, est_cost); the
    packaged worker answers argmin predicted latency."""
    from sklearn.neighbors import KNeighborsRegressor
    from sklearn.pipeline import Pipeline
    from sklearn.preprocessing import StandardScaler

    if not frame.rows:
        raise EmptyFrameError("no steering rows in frame")
    per_query = frame.hint_sets_per_query()
    if max(per_query.values()) < 2:
        raise DegenerateFrameError(
            "steering training needs at least two hint sets per query"
        )
    schema = FeatureSchema.from_payloads([r.query_payload for r in frame.rows])
    cost_scale = max(1.0, max(r.est_cost for r in frame.rows))
    model = SteeringModel(
        schema=schema,
        cost_scale=cost_scale,
        # 1-NN memorizes the measured table exactly, so replaying a training
        # query reproduces its true argmin
        regressor=Pipeline(
            [("scale", StandardScaler()), ("knn", KNeighborsRegressor(n_neighbors=1))]
        ),
    )
    x = np.asarray(
        [model._vector(r.query_payload, r.hint_set, r.est_cost) for r in frame.rows]
    )
    y = np.asarray([r.latency_ms for r in frame.rows])
    model.regressor = model.regressor.fit(x, y)
    return model


# --- data-driven cardinality (no collector needed) -----------------------------------


@dataclass
class _ColumnModel:
    kind: str
    total: int
    n_distinct: int
    boundaries: list
    common: dict

    def fraction(self, op: str, value) -> float:
        if op == "=":
            if value in self.common:
                return self.common[value] / self.total
            return 1.0 / max(1, self.n_distinct)
        if op == "<>":
            eq = self.fraction("=", value)
            return min(1.0, max(0.0, 1.0 - eq))
        if self.kind == "text" or not self.boundaries:
            return 0.33
        b = self.boundaries
        buckets = len(b) - 1
        if value <= b[0]:
            below = 0.0
        elif value >= b[-1]:
            below = 1.0
        else:
            i = min(bisect_right(b, value) - 1, buckets - 1)
            width = b[i + 1] - b[i]
            within = 0.5 if width == 0 else (value - b[i]) / width
            below = (i + within) / buckets
        return below if op in ("<", "<=") else 1.0 - below


@dataclass
class HistogramProductModel:
    """Per-table product of single-column fractions, learned straight from an
    exported CSV; the unsupervised counterpart to the query-driven model."""

    task = "CARDEST"
    table: str
    columns: dict = field(default_factory=dict)

    def predict_selectivity(self, payload: dict) -> float:
        sel = 1.0
        for f in payload.get("filters", ()):
            column = self.columns.get(f["column"])
            if column is None:
                continue
            sel *= column.fraction(f["op"], f["value"])
        return min(1.0, max(0.0, sel))

    def serve(self, payload: dict) -> dict:
        return {"selectivity": self.predict_selectivity(payload)}


def train_histogram_product(
    table: str,
    csv_path: str | Path,
    columns,
    buckets: int = 64,
    mcv_limit: int = 16,
) -> HistogramProductModel:
    """columns: iterable of (name, kind) in CSV field order."""
    columns = list(columns)
    values: dict[str, list] = {name: [] for name, _ in columns}
    total = 0
    with open(csv_path, newline="", encoding="utf-8") as fh:
        for record in csv.reader(fh):
            if not record:
                continue
            total += 1
            for (name, kind), text in zip(columns, record):
                if text == "":
                    continue
                if kind == "int64":
                    values[name].append(int(text))
                elif kind == "float64":
                    values[name].append(float(text))
                else:
                    values[name].append(text)
    if total == 0:
        raise EmptyFrameError(f"{csv_path} holds no rows")
    model = HistogramProductModel(table=table)
    for name, kind in columns:
        data = values[name]
        counts = Counter(data)
        common = dict(counts.most_common(mcv_limit))
        boundaries: list = []
        if kind in ("int64", "float64") and data:
            data = sorted(data)
            n = len(data)
            boundaries = [data[(j * (n - 1)) // buckets] for j in range(buckets + 1)]
        model.columns[name] = _ColumnModel(
            kind=kind,
            total=total,
            n_distinct=max(1, len(counts)),
            boundaries=boundaries,
            common=common,
        )
    return model
