"""Minimal dense-tensor arithmetic with reverse-mode differentiation."""

from . import backends
from .mlp import FeatureEncoder
from .tape import (
    dense,
    NumericsError,
    Tape,
    Tensor,
    add,
    arccos,
    exp,
    gather_rows,
    grad_wrt_input,
    l2_normalize,
    logsumexp,
    matmul,
    maximum_scalar,
    mean_all,
    mul,
    neg,
    relu,
    row_dot,
    rowmax_excluding,
    scale,
    square,
    sub,
    sub_colvec,
    sum_all,
)

__all__ = [
    "backends",
    "FeatureEncoder",
    "NumericsError",
    "Tape",
    "Tensor",
    "add",
    "dense",
    "arccos",
    "exp",
    "gather_rows",
    "grad_wrt_input",
    "l2_normalize",
    "logsumexp",
    "matmul",
    "maximum_scalar",
    "mean_all",
    "mul",
    "neg",
    "relu",
    "row_dot",
    "rowmax_excluding",
    "scale",
    "square",
    "sub",
    "sub_colvec",
    "sum_all",
]
