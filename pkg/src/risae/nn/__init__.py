from .layers import (
    Activation,
    BatchNorm,
    Conv1D,
    Dense,
    DimensionError,
    Sequential,
    StatisticsError,
    activation,
    conv1d_forward,
    dense_forward,
    softmax,
)
from .losses import cross_entropy
from .optim import Adam, OptimizerState, TrainSchedule, schedule_step
from .gradcheck import grad_check, grad_check_report

__all__ = [
    "Activation",
    "Adam",
    "BatchNorm",
    "Conv1D",
    "Dense",
    "DimensionError",
    "OptimizerState",
    "Sequential",
    "StatisticsError",
    "TrainSchedule",
    "activation",
    "conv1d_forward",
    "cross_entropy",
    "dense_forward",
    "grad_check",
    "grad_check_report",
    "schedule_step",
    "softmax",
]
