"""scikit-learn style wrapper around the tile classifier."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import InvalidInputError
from .model import (
    FIRE,
    NONFIRE,
    SegNetConfig,
    TrainOptions,
    as_float_batch,
    build_segnet,
    encode_labels,
    train,
)
from .nn import HingeLossConfig, ModelGraph, predict_scores


class SegNetClassifier(ClassifierMixin, BaseEstimator):
    """Fire / non-fire tile classifier.

    ``fit`` takes ``(n, H, W, 3)`` images (uint8 or floats in [0, 1]) and
    labels given either as ``"fire"``/``"nonfire"`` or as +1/-1.
    ``predict`` answers in the label vocabulary seen during ``fit``.
    """

    def __init__(self, input_shape=(240, 320, 3), pool_mode="downsample", epochs=15, batch_size=8,
                 lr=0.003, momentum=0.9, penalty_C=1.0, l2_lambda=0.01, l2_scope="output",
                 enhancements=("early_stopping", "augmentation", "l2_regularization"),
                 patience=3, seed=0):
        self.input_shape = input_shape
        self.pool_mode = pool_mode
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.momentum = momentum
        self.penalty_C = penalty_C
        self.l2_lambda = l2_lambda
        self.l2_scope = l2_scope
        self.enhancements = enhancements
        self.patience = patience
        self.seed = seed

    def _loss_config(self):
        return HingeLossConfig(penalty_C=self.penalty_C, l2_lambda=self.l2_lambda, l2_scope=self.l2_scope)

    def _check_images(self, X):
        X = np.asarray(X)
        if X.ndim == 3:
            X = X[None]
        if X.ndim != 4 or tuple(X.shape[1:]) != tuple(self.input_shape):
            raise InvalidInputError(f"expected images of shape (n, {', '.join(map(str, self.input_shape))}), got {X.shape}")
        return X

    def fit(self, X, y, X_val=None, y_val=None):
        X = self._check_images(X)
        if len(X) != len(y):
            raise InvalidInputError(f"{len(X)} images but {len(y)} labels")
        self.string_labels_ = any(isinstance(v, str) for v in y)
        self.classes_ = np.array([NONFIRE, FIRE] if self.string_labels_ else [-1, 1], dtype=object if self.string_labels_ else int)
        config = SegNetConfig(input_shape=tuple(self.input_shape), pool_mode=self.pool_mode,
                              loss=self._loss_config(), seed=self.seed)
        val = None if X_val is None else (self._check_images(X_val), encode_labels(y_val))
        model, history = train(build_segnet(config), (X, encode_labels(y)), val, epochs=self.epochs,
                               batch_size=self.batch_size, enhancements=self.enhancements,
                               config=config.loss,
                               options=TrainOptions(lr=self.lr, momentum=self.momentum,
                                                    patience=self.patience, seed=self.seed))
        self.model_ = model
        self.history_ = history
        return self

    @classmethod
    def from_model(cls, model: ModelGraph, string_labels=True, **params):
        """Wrap an already trained graph without refitting."""
        est = cls(input_shape=model.input_shape, **params)
        est.model_ = model
        est.history_ = None
        est.string_labels_ = string_labels
        est.classes_ = np.array([NONFIRE, FIRE], dtype=object) if string_labels else np.array([-1, 1])
        return est

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        return predict_scores(self.model_, as_float_batch(self._check_images(X)))

    def predict(self, X):
        fire = self.decision_function(X) >= 0
        if self.string_labels_:
            return np.where(fire, FIRE, NONFIRE).astype(object)
        return np.where(fire, 1, -1)

    def score(self, X, y, sample_weight=None):
        y = np.asarray(y, dtype=object) if self.string_labels_ else encode_labels(y).astype(int)
        return super().score(X, y, sample_weight)
