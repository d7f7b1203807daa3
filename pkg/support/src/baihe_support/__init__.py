"""Training-side toolkit: datasets, model trainers, worker packaging."""

from .datasets import DatasetError, SchemaVersionError, TrainingFrame, fetch_dataset
from .features import FeatureSchema
from .models import (
    CardestModel,
    CostModel,
    DegenerateFrameError,
    EmptyFrameError,
    HistogramProductModel,
    SteeringFrame,
    SteeringModel,
    build_steering_frame,
    train_cardest,
    train_cost,
    train_histogram_product,
    train_steering,
)
from .packaging import PackagedModel, package_model

__version__ = "0.1.0"

__all__ = [
    "CardestModel",
    "CostModel",
    "DatasetError",
    "DegenerateFrameError",
    "EmptyFrameError",
    "FeatureSchema",
    "HistogramProductModel",
    "PackagedModel",
    "SchemaVersionError",
    "SteeringFrame",
    "SteeringModel",
    "TrainingFrame",
    "build_steering_frame",
    "fetch_dataset",
    "package_model",
    "train_cardest",
    "train_cost",
    "train_histogram_product",
    "train_steering",
    "__version__",
]
