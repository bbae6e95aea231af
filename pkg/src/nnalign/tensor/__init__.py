"""Minimal reverse-mode numeric kernel for the neural aligners."""

from .autograd import (
    Tensor,
    concat,
    dropout,
    htanh,
    log_softmax,
    logsumexp_masked,
    take_flat,
    take_rows,
    total,
    weighted_sum,
)
from .checkpoint import load_tensors, save_tensors
from .gradcheck import grad_check, numeric_grad, relative_error
from .layers import bilstm_encode, bilstm_states, conv_combine, embedding, linear, lstm
from .optim import ParameterStore, adam_step

__all__ = [
    "Tensor",
    "ParameterStore",
    "adam_step",
    "bilstm_encode",
    "bilstm_states",
    "concat",
    "conv_combine",
    "dropout",
    "embedding",
    "grad_check",
    "htanh",
    "linear",
    "load_tensors",
    "log_softmax",
    "logsumexp_masked",
    "lstm",
    "numeric_grad",
    "relative_error",
    "save_tensors",
    "take_flat",
    "take_rows",
    "total",
    "weighted_sum",
]
