"""Dense-tensor numeric core: layer forward/backward passes, losses, Adam."""

from .ops import (
    conv2d,
    conv3d,
    dense,
    relu,
    sigmoid,
    tanh,
    maxpool2d,
    maxpool3d,
    convlstm2d_step,
)
from .losses import mse_loss, mae_metric
from .layers import LayerSpec, Network, infer_param_shapes, infer_output_shape
from .optim import AdamState, adam_step

__all__ = [
    "conv2d",
    "conv3d",
    "dense",
    "relu",
    "sigmoid",
    "tanh",
    "maxpool2d",
    "maxpool3d",
    "convlstm2d_step",
    "mse_loss",
    "mae_metric",
    "LayerSpec",
    "Network",
    "infer_param_shapes",
    "infer_output_shape",
    "AdamState",
    "adam_step",
]
