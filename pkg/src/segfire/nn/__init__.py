"""Minimal float64 tensor engine: conv, max-pool, flatten and dense layers."""

from .gradcheck import finite_difference_check
from .graph import Gradients, ModelGraph, backward, forward, forward_batch, predict_scores
from .layers import (
    ConvLayer,
    DenseLayer,
    FlattenLayer,
    PoolLayer,
    conv2d_forward,
    dense_forward,
    maxpool2d_forward,
    same_padding,
)
from .loss import HingeLossConfig, l2svm_loss, l2svm_loss_and_grad, loss_and_gradients, penalised_weights
from .optim import SGD, sgd_step

__all__ = [
    "ConvLayer", "DenseLayer", "FlattenLayer", "PoolLayer", "ModelGraph", "Gradients",
    "HingeLossConfig", "SGD", "backward", "conv2d_forward", "dense_forward",
    "finite_difference_check", "forward", "forward_batch", "l2svm_loss",
    "l2svm_loss_and_grad", "loss_and_gradients", "maxpool2d_forward",
    "penalised_weights", "predict_scores", "same_padding", "sgd_step",
]
