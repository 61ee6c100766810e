"""Soft-margin SVM losses for a single linear output unit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import InvalidInputError
from .graph import backward, forward_batch

HINGE_KINDS = ("squared", "l1")


@dataclass(frozen=True)
class HingeLossConfig:
    """Soft-margin penalty ``penalty_C`` and weight penalty ``l2_lambda``.

    ``hinge="squared"`` is the differentiable L2-SVM loss; ``"l1"`` is the
    plain hinge.  ``l2_scope`` picks which weights the penalty covers:
    ``"output"`` (the final layer only) or ``"dense"`` (every dense layer).
    """

    penalty_C: float = 1.0
    l2_lambda: float = 0.01
    hinge: str = "squared"
    l2_scope: str = "output"

    def __post_init__(self):
        if not self.penalty_C > 0:
            raise InvalidInputError("penalty_C must be > 0")
        if not self.l2_lambda >= 0:
            raise InvalidInputError("l2_lambda must be >= 0")
        if self.hinge not in HINGE_KINDS:
            raise InvalidInputError(f"hinge must be one of {HINGE_KINDS}")
        if self.l2_scope not in ("output", "dense"):
            raise InvalidInputError("l2_scope must be 'output' or 'dense'")


def _check(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels, dtype=np.float64).reshape(-1)
    if scores.size == 0:
        raise InvalidInputError("empty batch")
    if scores.shape != labels.shape:
        raise InvalidInputError(f"{scores.size} scores but {labels.size} labels")
    if not np.all((labels == 1) | (labels == -1)):
        raise InvalidInputError("labels must be -1 or +1")
    return scores, labels


def _weights_list(output_weights):
    if output_weights is None:
        return []
    if isinstance(output_weights, np.ndarray):
        return [output_weights]
    return list(output_weights)


def l2svm_loss(scores, labels, output_weights, config: HingeLossConfig) -> float:
    """Batch loss ``l2_lambda * |w|^2 / p + C * sum(max(0, 1 - y*s)^2)``.

    ``output_weights`` is one weight array or a list of them; biases are
    not penalised.
    """
    return l2svm_loss_and_grad(scores, labels, output_weights, config)[0]


def l2svm_loss_and_grad(scores, labels, output_weights, config: HingeLossConfig):
    """Return ``(loss, dL/dscores, [dL/dw for each penalised weight array])``."""
    scores, labels = _check(scores, labels)
    p = scores.size
    slack = np.maximum(0.0, 1.0 - labels * scores)
    if config.hinge == "squared":
        data = config.penalty_C * float(np.sum(slack ** 2))
        dscores = -2.0 * config.penalty_C * labels * slack
    else:
        data = config.penalty_C * float(np.sum(slack))
        dscores = -config.penalty_C * labels * (slack > 0)
    weights = _weights_list(output_weights)
    reg = config.l2_lambda / p * sum(float(np.sum(w * w)) for w in weights)
    dweights = [2.0 * config.l2_lambda / p * w for w in weights]
    return reg + data, dscores, dweights


def penalised_weights(model, config: HingeLossConfig):
    """The weight arrays covered by the L2 term under ``config.l2_scope``."""
    dense = model.dense_layers()
    if not dense:
        return []
    if config.l2_scope == "output":
        return [dense[-1].weights]
    return [layer.weights for layer in dense]


def loss_and_gradients(model, x, labels, config: HingeLossConfig):
    """Forward + backward for one batch; return ``(loss, scores, Gradients)``."""
    out, cache = forward_batch(model, x)
    scores = out[:, 0]
    weights = penalised_weights(model, config)
    loss, dscores, dweights = l2svm_loss_and_grad(scores, labels, weights, config)
    grads = backward(model, cache, dscores[:, None])
    params = model.parameters()
    for w, dw in zip(weights, dweights):
        idx = next(i for i, p in enumerate(params) if p is w)
        grads.tensors[idx] = grads.tensors[idx] + dw
    return loss, scores, grads
