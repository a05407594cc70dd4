"""Small numpy neural-network kernel and the supervised Linfoot models."""

from .io import FORMAT_VERSION, load_model, model_from_bytes, save_model
from .layers import (
    BatchNorm, Concat, Conv2D, Dense, Dropout, Flatten, Layer, MaxPool2x2, PruneMask, ReLU, Rescale,
    layer_from_spec,
)
from .model import (
    BUILDERS, Adam, Network, TrainConfig, build_model1, build_model2, build_model3, predict_linfoot, train,
)

__all__ = [
    "Adam", "BUILDERS", "BatchNorm", "Concat", "Conv2D", "Dense", "Dropout", "FORMAT_VERSION", "Flatten",
    "Layer", "MaxPool2x2", "Network", "PruneMask", "ReLU", "Rescale", "TrainConfig", "build_model1",
    "build_model2", "build_model3", "layer_from_spec", "load_model", "model_from_bytes", "predict_linfoot",
    "save_model", "train",
]
