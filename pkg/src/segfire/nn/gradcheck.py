"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np

from ..exceptions import InvalidInputError
from .graph import activation_pattern, forward_batch
from .loss import HingeLossConfig, l2svm_loss, loss_and_gradients, penalised_weights


def relative_error(analytic, numeric, floor=1e-8):
    """``|a - n| / max(|a|, |n|, floor)``; the floor keeps exact zeros comparable."""
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def _loss_and_branches(model, x, labels, config):
    """Loss plus every ReLU mask, pool argmax and hinge activity of one forward pass."""
    out, cache = forward_batch(model, x)
    loss = l2svm_loss(out[:, 0], labels, penalised_weights(model, config), config)
    margins_active = (labels * out[:, 0]) < 1
    return loss, activation_pattern(cache) + [margins_active]


def _same_branches(a, b):
    return len(a) == len(b) and all(np.array_equal(u, v) for u, v in zip(a, b))


def finite_difference_check(model, x, label, config=None, epsilon=1e-5, samples=20, seed=0):
    """Compare analytic gradients with ``(L(t+e) - L(t-e)) / 2e``.

    Up to ``samples`` parameters per layer are drawn (all of them if the
    layer has fewer).  A draw is discarded when the perturbation flips any
    ReLU mask, pool argmax or hinge activity, since the loss is not
    differentiable across those switches.

    Returns ``{layer_name: {"max_rel_error": float, "checked": int, "skipped": int}}``.
    """
    if not 1e-7 <= epsilon <= 1e-3:
        raise InvalidInputError("epsilon must be in [1e-7, 1e-3]")
    config = config or HingeLossConfig()
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3:
        x = x[None]
    labels = np.asarray(label, dtype=np.float64).reshape(-1)
    if labels.size == 1 and x.shape[0] > 1:
        labels = np.repeat(labels, x.shape[0])

    _, _, grads = loss_and_gradients(model, x, labels, config)
    rng = np.random.default_rng(seed)
    report = {}
    tensors = iter(grads.tensors)
    for layer in model.param_layers():
        worst, checked, skipped = 0.0, 0, 0
        for param in layer.params:
            grad = next(tensors)
            n = param.size
            picks = rng.permutation(n)[: min(n, samples)] if n > samples else np.arange(n)
            flat = param.reshape(-1)
            for i in picks:
                orig = flat[i]
                flat[i] = orig + epsilon
                model.mark_modified()
                plus, state_plus = _loss_and_branches(model, x, labels, config)
                flat[i] = orig - epsilon
                model.mark_modified()
                minus, state_minus = _loss_and_branches(model, x, labels, config)
                flat[i] = orig
                model.mark_modified()
                if not _same_branches(state_plus, state_minus):
                    skipped += 1
                    continue
                numeric = (plus - minus) / (2 * epsilon)
                worst = max(worst, relative_error(grad.reshape(-1)[i], numeric))
                checked += 1
        report[layer.name] = {"max_rel_error": worst, "checked": checked, "skipped": skipped}
    return report
