from freqnet.nn.layers import (
    BatchNorm,
    Conv2D,
    Dense,
    DimensionError,
    Dropout,
    GlobalAvgPool,
    Layer,
    ReLU,
    ResidualBlock,
    TransformLayer,
    softmax,
    softmax_cross_entropy,
)
from freqnet.nn.model import ModelSpec, Network, ParamStore, Placement, SpecError, build_model
from freqnet.nn.optim import Adam
from freqnet.nn.train import TrainConfig, evaluate, loss_and_metrics, train

__all__ = [
    "Adam", "BatchNorm", "Conv2D", "Dense", "DimensionError", "Dropout", "GlobalAvgPool", "Layer",
    "ModelSpec", "Network", "ParamStore", "Placement", "ReLU", "ResidualBlock", "SpecError",
    "TrainConfig", "TransformLayer", "build_model", "evaluate", "loss_and_metrics", "softmax",
    "softmax_cross_entropy", "train",
]
