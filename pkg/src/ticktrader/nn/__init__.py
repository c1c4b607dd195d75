from .tensor import Tensor, ParameterSet
from .layers import LayerSpec, conv1d, dense, relu, tanh, softmax_layer, flatten
from .layers import init_params, forward, forward_trace, backward_trace, output_shape
from .functional import softmax, cross_entropy, loss, backward, mse_loss_and_grads
from .functional import loss_and_grads, clamp_warnings
from .optim import optimizer_step, SGD, clip_gradients
from .checkpoint import save_params, load_params

__all__ = [
    "Tensor", "ParameterSet", "LayerSpec",
    "conv1d", "dense", "relu", "tanh", "softmax_layer", "flatten",
    "init_params", "forward", "forward_trace", "backward_trace", "output_shape",
    "softmax", "cross_entropy", "loss", "backward", "loss_and_grads",
    "mse_loss_and_grads", "clamp_warnings",
    "optimizer_step", "SGD", "clip_gradients", "save_params", "load_params",
]
