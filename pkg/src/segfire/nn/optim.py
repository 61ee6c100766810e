"""Momentum SGD."""

from __future__ import annotations

import numpy as np

from ..exceptions import InvalidInputError, InvalidStateError


class SGD:
    """Plain SGD with heavy-ball momentum and optional weight decay.

    Per parameter: ``v = momentum * v - lr * (g + l2_lambda * param)``
    followed by ``param += v``.  Velocities start at zero.
    """

    def __init__(self, lr=0.01, momentum=0.9, l2_lambda=0.0):
        if not lr > 0:
            raise InvalidInputError("lr must be > 0")
        if not 0 <= momentum < 1:
            raise InvalidInputError("momentum must be in [0, 1)")
        if not l2_lambda >= 0:
            raise InvalidInputError("l2_lambda must be >= 0")
        self.lr = lr
        self.momentum = momentum
        self.l2_lambda = l2_lambda
        self.velocity = None

    def step(self, model, grads, decay_params=None):
        """Update ``model`` in place.

        ``decay_params`` limits weight decay to the listed arrays; by
        default every parameter decays.
        """
        params = model.parameters()
        if len(grads.tensors) != len(params):
            raise InvalidInputError(f"{len(grads.tensors)} gradient tensors for {len(params)} parameters")
        for name, p, g in zip(grads.names, params, grads.tensors):
            if g.shape != p.shape:
                raise InvalidInputError(f"{name}: gradient shape {g.shape} does not match parameter {p.shape}")
            if not np.all(np.isfinite(g)):
                raise InvalidStateError(f"non-finite gradient in {name}")
        if self.velocity is None:
            self.velocity = [np.zeros_like(p) for p in params]
        decayed = None if decay_params is None else {id(a) for a in decay_params}
        for p, g, v in zip(params, grads.tensors, self.velocity):
            v *= self.momentum
            if self.l2_lambda and (decayed is None or id(p) in decayed):
                v -= self.lr * (g + self.l2_lambda * p)
            else:
                v -= self.lr * g
            p += v
        model.mark_modified()
        return model


def sgd_step(model, grads, lr, momentum=0.0, l2_lambda=0.0, optimizer=None):
    """Apply one update in place and return the model.

    Pass the same ``optimizer`` across calls to carry momentum; without one
    the velocity starts from zero.
    """
    opt = optimizer if optimizer is not None else SGD(lr, momentum, l2_lambda)
    return opt.step(model, grads)
