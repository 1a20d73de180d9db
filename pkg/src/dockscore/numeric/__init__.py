"""Float64 tensor math with reverse-mode autodiff, Adam, and seeded RNG."""

from .gradcheck import GradCheckResult, finite_diff_check
from .optim import Adam
from .rng import SeededRng
from .tensor import (
    Tensor,
    add,
    backward,
    concat,
    dropout,
    elu,
    exp,
    forward_op,
    gather_rows,
    layer_norm,
    log,
    matmul,
    mul,
    reduce_max,
    reduce_mean,
    reduce_min,
    reduce_sum,
    relu,
    scalar_mul,
    segment_reduce,
    sigmoid,
    signed_root,
    slice_axis,
    softmax,
    sqrt,
    sub,
    tanh,
    tensor,
    transpose,
)

__all__ = [
    "Adam",
    "GradCheckResult",
    "SeededRng",
    "Tensor",
    "add",
    "backward",
    "concat",
    "dropout",
    "elu",
    "exp",
    "finite_diff_check",
    "forward_op",
    "gather_rows",
    "layer_norm",
    "log",
    "matmul",
    "mul",
    "reduce_max",
    "reduce_mean",
    "reduce_min",
    "reduce_sum",
    "relu",
    "scalar_mul",
    "segment_reduce",
    "sigmoid",
    "signed_root",
    "slice_axis",
    "softmax",
    "sqrt",
    "sub",
    "tanh",
    "tensor",
    "transpose",
]
