from . import kernels
from .graph import ModelGraph, NonFiniteError, assert_finite
from .layers import (LSTM, BatchNorm, CausalConv1D, Dense, Dropout, Layer,
                     PReLU, Softmax)
from .losses import weighted_cross_entropy
from .optim import GradientDescent, RMSProp, make_optimizer

__all__ = [
    "kernels", "ModelGraph", "NonFiniteError", "assert_finite",
    "LSTM", "BatchNorm", "CausalConv1D", "Dense", "Dropout", "Layer",
    "PReLU", "Softmax", "weighted_cross_entropy",
    "GradientDescent", "RMSProp", "make_optimizer",
]
