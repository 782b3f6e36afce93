"""Small reverse-mode differentiation kernel on numpy arrays."""
from gounsafe.autodiff.check import gradient_check, numeric_grad, relative_error
from gounsafe.autodiff.core import Tape, Tensor, as_tensor, backward
from gounsafe.autodiff.ops import (
    BatchNormState, activation, add, batch_norm, columns, concat, cross_entropy, dropout, exp,
    gather_rows, log, log_softmax, matmul, mean, mul, pick, reshape, segment_max, segment_mean,
    segment_min, segment_softmax, segment_sum, softmax, sub, sum_,
)
from gounsafe.autodiff.optim import Adam, OptimizerState, adam_step

__all__ = [
    "Adam", "BatchNormState", "OptimizerState", "Tape", "Tensor", "activation", "adam_step",
    "add", "as_tensor", "backward", "batch_norm", "columns", "concat", "cross_entropy",
    "dropout", "exp", "gather_rows", "gradient_check", "log", "log_softmax", "matmul", "mean",
    "mul", "numeric_grad", "pick", "relative_error", "reshape", "segment_max", "segment_mean",
    "segment_min", "segment_softmax", "segment_sum", "softmax", "sub", "sum_",
]
