"""Command-line entry points: baihe-fetch, baihe-train, baihe-package."""

from __future__ import annotations

import argparse
import json
import pickle
import sys

from .datasets import DatasetError, fetch_dataset
from .models import (
    EmptyFrameError,
    DegenerateFrameError,
    build_steering_frame,
    train_cardest,
    train_cost,
    train_steering,
)
from .packaging import package_model

# named hint sets mirroring the engine's steering family
NAMED_HINT_SETS = {
    "all": {},
    "no_hashjoin": {"enable_hashjoin": False},
    "no_nestloop": {"enable_nestloop": False},
    "no_indexscan": {"enable_indexscan": False},
    "seq_nestloop": {"enable_hashjoin": False, "enable_indexscan": False},
}


def _full_hint_set(overrides: dict) -> dict:
    base = {
        "enable_hashjoin": True,
        "enable_nestloop": True,
        "enable_indexscan": True,
        "enable_seqscan": True,
    }
    base.update(overrides)
    return base


def fetch_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="baihe-fetch", description="Dump derived training rows from a dataset"
    )
    parser.add_argument("--data-dir", required=True)
    parser.add_argument("--dataset", required=True)
    parser.add_argument("--version", type=int, required=True)
    parser.add_argument("--view", choices=("cardest", "cost", "records"), default="cardest")
    parser.add_argument("--out", help="output JSONL path (default: stdout)")
    args = parser.parse_args(argv)
    try:
        frame = fetch_dataset(args.data_dir, args.dataset, args.version)
    except DatasetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.view == "cardest":
        rows = [
            {**r.payload(), "cardinality": r.cardinality, "selectivity": r.selectivity}
            for r in frame.cardest_rows()
        ]
    elif args.view == "cost":
        rows = [
            {**r.features, "wall_time_ms": r.wall_time_ms, "actual_rows": r.actual_rows}
            for r in frame.cost_rows()
        ]
    else:
        rows = frame.records
    sink = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for row in rows:
            sink.write(json.dumps(row) + "\n")
    finally:
        if args.out:
            sink.close()
    print(f"{len(rows)} rows from {args.dataset} v{args.version}", file=sys.stderr)
    return 0


def train_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="baihe-train", description="Train a model from collected datasets"
    )
    parser.add_argument("--data-dir", required=True)
    parser.add_argument("--task", required=True, choices=("CARDEST", "COST", "STEER"))
    parser.add_argument("--dataset", help="dataset id (CARDEST/COST)")
    parser.add_argument("--version", type=int, help="dataset version (CARDEST/COST)")
    parser.add_argument(
        "--run",
        action="append",
        default=[],
        metavar="DATASET:VERSION:HINTSET",
        help="STEER only: one collected run per hint set (repeatable)",
    )
    parser.add_argument("--out", required=True, help="pickled model output path")
    args = parser.parse_args(argv)
    try:
        if args.task == "STEER":
            if len(args.run) < 2:
                print("error: STEER needs at least two --run datasets", file=sys.stderr)
                return 1
            runs = []
            for spec in args.run:
                dataset_id, version, hint_name = spec.rsplit(":", 2)
                if hint_name not in NAMED_HINT_SETS:
                    print(f"error: unknown hint set {hint_name!r}", file=sys.stderr)
                    return 1
                runs.append(
                    (dataset_id, int(version), _full_hint_set(NAMED_HINT_SETS[hint_name]))
                )
            model = train_steering(build_steering_frame(args.data_dir, runs))
        else:
            if args.dataset is None or args.version is None:
                print("error: --dataset and --version are required", file=sys.stderr)
                return 1
            frame = fetch_dataset(args.data_dir, args.dataset, args.version)
            model = train_cardest(frame) if args.task == "CARDEST" else train_cost(frame)
    except (DatasetError, EmptyFrameError, DegenerateFrameError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    with open(args.out, "wb") as fh:
        pickle.dump(model, fh)
    print(f"trained {args.task} model -> {args.out}", file=sys.stderr)
    return 0


def package_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="baihe-package", description="Package a trained model as a worker directory"
    )
    parser.add_argument("--model", required=True, help="pickled model path")
    parser.add_argument("--task", required=True, choices=("CARDEST", "COST", "STEER"))
    parser.add_argument("--name", help="model name (default: output directory name)")
    parser.add_argument("--out", required=True, help="worker directory to create")
    args = parser.parse_args(argv)
    with open(args.model, "rb") as fh:
        model = pickle.load(fh)
    try:
        packaged = package_model(model, args.task, args.out, args.name)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"packaged {packaged.manifest['name']} -> {packaged.path}", file=sys.stderr)
    return 0
