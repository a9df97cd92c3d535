from .layers import (
    BatchNorm,
    Context,
    Conv2d,
    Dense,
    Dropout,
    Flatten,
    MaxPool,
    PELU,
    PReLU,
    ScalarScale,
    SliceChannels,
    Sum,
)
from .network import (
    Network,
    Node,
    load_network,
    network_from_state,
    softmax,
    softmax_cross_entropy,
)
from .optim import Adam
from .train import (
    TrainConfig,
    TrainHistory,
    evaluate_accuracy,
    evaluate_loss,
    finalize_bn,
    train,
)

__all__ = [
    "Adam",
    "BatchNorm",
    "Context",
    "Conv2d",
    "Dense",
    "Dropout",
    "Flatten",
    "MaxPool",
    "Network",
    "Node",
    "PELU",
    "PReLU",
    "ScalarScale",
    "SliceChannels",
    "Sum",
    "TrainConfig",
    "TrainHistory",
    "evaluate_accuracy",
    "evaluate_loss",
    "finalize_bn",
    "load_network",
    "network_from_state",
    "softmax",
    "softmax_cross_entropy",
    "train",
]
