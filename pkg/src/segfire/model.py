"""The SegNet tile classifier: builder, trainer and sign-rule classifier."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import FrozenSet, List, Optional, Sequence

import numpy as np

from .exceptions import BuildError, InvalidInputError
from .nn import (
    SGD,
    ConvLayer,
    DenseLayer,
    FlattenLayer,
    HingeLossConfig,
    ModelGraph,
    PoolLayer,
    l2svm_loss,
    loss_and_gradients,
    penalised_weights,
    predict_scores,
)

log = logging.getLogger(__name__)

FIRE, NONFIRE = "fire", "nonfire"
LABEL_TO_SIGN = {FIRE: 1, NONFIRE: -1}
ENHANCEMENTS = ("early_stopping", "augmentation", "l2_regularization")


@dataclass(frozen=True)
class SegNetConfig:
    """Architecture and loss settings.

    Defaults give the reference layer list: three 3x3 stride-2 SAME
    convolutions (32/64/128 filters, ReLU) separated by two 2x2 max-pools,
    a flatten, two 16-unit ReLU dense layers and one linear output unit.

    ``trailing_pool`` appends a pool after the last convolution; the sweep
    driver uses it to build the even-depth cells.
    """

    input_shape: tuple = (240, 320, 3)
    conv_filters: tuple = (32, 64, 128)
    kernel: int = 3
    conv_stride: int = 2
    pool_mode: str = "downsample"
    pool_size: int = 2
    dense_units: tuple = (16, 16)
    output_units: int = 1
    trailing_pool: bool = False
    loss: HingeLossConfig = field(default_factory=HingeLossConfig)
    seed: int = 0

    @property
    def weighted_layers(self):
        """Convolution plus pooling layers, the depth axis of the sweep table."""
        return 2 * len(self.conv_filters) - 1 + int(self.trailing_pool)


def _uniform(rng, fan_in, variance, shape):
    bound = np.sqrt(3.0 * variance)
    return rng.uniform(-bound, bound, size=shape)


def build_segnet(config: SegNetConfig = SegNetConfig(), initialise: bool = True) -> ModelGraph:
    """Build and initialise the network described by ``config``.

    ReLU layers draw weights uniformly with variance ``2 / fan_in``; the
    linear output uses ``1 / fan_in``.  Biases start at zero.

    With ``initialise=False`` every parameter is a read-only zero view that
    allocates no memory, which is enough for shape and cost analysis of
    architectures too large to materialise.
    """
    if not config.conv_filters:
        raise BuildError("at least one convolution layer is required")
    if config.kernel < 1 or config.conv_stride < 1:
        raise BuildError("kernel and conv_stride must be >= 1")
    rng = np.random.default_rng(config.seed)
    if initialise:
        init = lambda fan_in, variance, shape: _uniform(rng, fan_in, variance, shape)
    else:
        init = lambda fan_in, variance, shape: np.broadcast_to(0.0, shape)
    layers = []
    channels = config.input_shape[2]
    n_conv = len(config.conv_filters)
    for i, filters in enumerate(config.conv_filters, start=1):
        fan_in = channels * config.kernel ** 2
        kernels = init(fan_in, 2.0 / fan_in, (filters, channels, config.kernel, config.kernel))
        layers.append(ConvLayer(kernels, np.zeros(filters), stride=config.conv_stride,
                                activation="relu", name=f"conv{i}"))
        if i < n_conv or config.trailing_pool:
            layers.append(PoolLayer(config.pool_size, config.pool_size, config.pool_mode, name=f"pool{i}"))
        channels = filters
    layers.append(FlattenLayer(name="flatten"))
    # validates the conv stack and yields the flatten width
    n = ModelGraph(list(layers), config.input_shape).shape_trace()[-1][0]
    for j, units in enumerate(config.dense_units, start=1):
        layers.append(DenseLayer(init(n, 2.0 / n, (n, units)), np.zeros(units),
                                 activation="relu", name=f"dense{j}"))
        n = units
    layers.append(DenseLayer(init(n, 1.0 / n, (n, config.output_units)),
                             np.zeros(config.output_units), activation="linear", name="output"))
    return ModelGraph(layers, config.input_shape)


def param_count(model: ModelGraph):
    """Per-layer parameter counts (in layer order) and their total."""
    per_layer = {layer.name: layer.param_count() for layer in model.layers}
    return per_layer, sum(per_layer.values())


def zero_parameters(model: ModelGraph):
    for p in model.parameters():
        p[...] = 0.0
    model.mark_modified()
    return model


def as_float_batch(x):
    """Scale 8-bit pixels to [0, 1]; float input passes through as float64."""
    x = np.asarray(x)
    if x.dtype == np.uint8:
        return x.astype(np.float64) / 255.0
    return x.astype(np.float64, copy=False)


def encode_labels(labels) -> np.ndarray:
    """Map ``fire``/``nonfire`` strings or +/-1 values to a +/-1 float array."""
    out = []
    for y in labels:
        if isinstance(y, str):
            if y not in LABEL_TO_SIGN:
                raise InvalidInputError(f"unknown label {y!r}")
            out.append(LABEL_TO_SIGN[y])
        elif y in (1, -1):
            out.append(int(y))
        else:
            raise InvalidInputError(f"label {y!r} is not fire/nonfire or +/-1")
    return np.asarray(out, dtype=np.float64)


def classify(model: ModelGraph, tile):
    """Return ``(label, score)``; a score of exactly 0 counts as fire."""
    score = float(predict_scores(model, as_float_batch(tile)))
    return (FIRE if score >= 0 else NONFIRE), score


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_accuracy: float
    val_accuracy: float
    train_loss: float
    val_loss: float


@dataclass
class TrainingHistory:
    """Per-epoch metrics of one training run.

    Losses are the batch loss divided by the number of samples; the train
    figures are running values accumulated over the epoch's batches.
    """

    enhancements: FrozenSet[str] = frozenset()
    records: List[EpochRecord] = field(default_factory=list)
    stopped_early: bool = False
    best_epoch: Optional[int] = None

    @property
    def flags(self):
        return {"plain": not self.enhancements, **{e: e in self.enhancements for e in ENHANCEMENTS}}

    def __len__(self):
        return len(self.records)

    def final_gap(self):
        """Train minus validation accuracy at the last recorded epoch."""
        last = self.records[-1]
        return last.train_accuracy - last.val_accuracy

    def as_rows(self):
        return [vars(r).copy() for r in self.records]


@dataclass(frozen=True)
class TrainOptions:
    """Optimiser and enhancement knobs for :func:`train`."""

    lr: float = 0.003
    momentum: float = 0.9
    patience: int = 3
    restore_best: bool = True
    augment_fraction: float = 0.25
    augmentation: Optional[object] = None
    seed: int = 0


def _normalise_enhancements(enhancements) -> FrozenSet[str]:
    if enhancements is None or enhancements == "plain":
        return frozenset()
    if isinstance(enhancements, str):
        enhancements = [enhancements]
    flags = frozenset(e for e in enhancements if e not in ("plain", "none"))
    unknown = flags - set(ENHANCEMENTS)
    if unknown:
        raise InvalidInputError(f"unknown enhancements {sorted(unknown)}; expected {ENHANCEMENTS}")
    return flags


def _augment_dataset(x, y, options):
    from .imaging.augment import AugmentationSpec, augment_array

    spec = options.augmentation or AugmentationSpec.default()
    rng = np.random.default_rng([options.seed, 0xA6])
    n_extra = int(round(options.augment_fraction * len(x)))
    picks = np.sort(rng.choice(len(x), size=min(n_extra, len(x)), replace=False))
    seeds = rng.integers(0, 2 ** 32, size=len(picks))
    extra = [augment_array(x[i], replace(spec, seed=int(s))) for i, s in zip(picks, seeds)]
    if not extra:
        return x, y
    return np.concatenate([x, np.stack(extra)]), np.concatenate([y, y[picks]])


def evaluate(model: ModelGraph, x, y, config: HingeLossConfig, batch_size=64):
    """Return ``(accuracy, mean_loss)`` on a labelled set."""
    labels = encode_labels(y)
    scores = np.concatenate([predict_scores(model, as_float_batch(x[i:i + batch_size]), batch_size)
                             for i in range(0, len(x), batch_size)])
    accuracy = float(np.mean(np.where(scores >= 0, 1, -1) == labels))
    loss = l2svm_loss(scores, labels, penalised_weights(model, config), config) / len(labels)
    return accuracy, loss


def split_validation(x, y, fraction=0.2, seed=0):
    """Deterministic shuffled split; returns ``(x_train, y_train, x_val, y_val)``."""
    order = np.random.default_rng(seed).permutation(len(x))
    n_val = max(1, int(round(fraction * len(x))))
    val, tr = order[:n_val], order[n_val:]
    return x[tr], np.asarray(y)[tr], x[val], np.asarray(y)[val]


def train(model: ModelGraph, train_set, val_set=None, epochs=15, batch_size=8,
          enhancements=None, config: Optional[HingeLossConfig] = None,
          options: Optional[TrainOptions] = None):
    """Mini-batch SGD on the squared-hinge objective.

    ``train_set`` and ``val_set`` are ``(images, labels)`` pairs; images may
    be uint8 (scaled to [0, 1]) or float.  Without ``val_set`` a seeded
    80/20 split is taken from ``train_set``.

    Each step follows the gradient of ``C * mean(max(0, 1 - y*s)^2)`` over
    the batch.  The ``l2_regularization`` enhancement adds weight decay of
    ``config.l2_lambda`` on the weights chosen by ``config.l2_scope``;
    ``augmentation`` appends augmented copies of a seeded
    ``options.augment_fraction`` share of the training images;
    ``early_stopping`` halts after ``options.patience`` epochs without a
    lower validation loss.

    Returns ``(model, history)``; the model is updated in place.
    """
    options = options or TrainOptions()
    config = config or HingeLossConfig()
    flags = _normalise_enhancements(enhancements)
    history = TrainingHistory(enhancements=flags)
    if batch_size < 1:
        raise InvalidInputError("batch_size must be >= 1")
    x, y = train_set
    if len(x) == 0:
        raise InvalidInputError("empty training set")
    y = encode_labels(y)
    if val_set is None:
        x, y, x_val, y_val = split_validation(np.asarray(x), y, 0.2, options.seed)
    else:
        x_val, y_val = val_set
        y_val = encode_labels(y_val)
        if len(x_val) == 0:
            raise InvalidInputError("empty validation set")
    if epochs <= 0:
        return model, history

    if "augmentation" in flags:
        x, y = _augment_dataset(np.asarray(x), y, options)
    use_l2 = "l2_regularization" in flags
    report_config = config if use_l2 else replace(config, l2_lambda=0.0)
    step_config = replace(config, l2_lambda=0.0)
    optimizer = SGD(options.lr, options.momentum, config.l2_lambda if use_l2 else 0.0)
    rng = np.random.default_rng(options.seed)
    best_loss, best_params, stale = np.inf, None, 0

    for epoch in range(epochs):
        order = rng.permutation(len(x))
        correct, loss_sum = 0, 0.0
        for start in range(0, len(x), batch_size):
            idx = np.sort(order[start:start + batch_size])
            xb, yb = as_float_batch(x[idx]), y[idx]
            loss, scores, grads = loss_and_gradients(model, xb, yb, step_config)
            p = len(idx)
            grads.tensors = [g / p for g in grads.tensors]
            decay = penalised_weights(model, config) if use_l2 else []
            optimizer.step(model, grads, decay_params=decay)
            correct += int(np.sum(np.where(scores >= 0, 1, -1) == yb))
            loss_sum += loss
        train_acc = correct / len(x)
        train_loss = loss_sum / len(x)
        if use_l2:
            train_loss += sum(report_config.l2_lambda * float(np.sum(w * w))
                              for w in penalised_weights(model, config)) / len(x)
        val_acc, val_loss = evaluate(model, x_val, y_val, report_config)
        history.records.append(EpochRecord(epoch, train_acc, val_acc, train_loss, val_loss))
        log.info("epoch %d: train acc %.4f loss %.4f, val acc %.4f loss %.4f",
                 epoch, train_acc, train_loss, val_acc, val_loss)
        if val_loss < best_loss:
            best_loss, stale, history.best_epoch = val_loss, 0, epoch
            if "early_stopping" in flags and options.restore_best:
                best_params = [p.copy() for p in model.parameters()]
        else:
            stale += 1
            if "early_stopping" in flags and stale >= options.patience:
                history.stopped_early = True
                break
    # early stopping hands back the weights of the best validation epoch
    if best_params is not None and history.best_epoch != history.records[-1].epoch:
        for p, best in zip(model.parameters(), best_params):
            p[...] = best
        model.mark_modified()
    return model, history


def sweep_config(base: SegNetConfig, conv_layers: int, dense_layers: int) -> SegNetConfig:
    """Config for one cell of the depth sweep.

    ``conv_layers`` counts convolutions plus pools, so the default stack is
    the 5-layer cell.  Deeper cells alternate pool and convolution, each new
    convolution doubling the filter count; ``dense_layers`` sets the number
    of 16-unit hidden dense layers.
    """
    if conv_layers < 1 or dense_layers < 0:
        raise InvalidInputError("conv_layers must be >= 1 and dense_layers >= 0")
    n_conv = (conv_layers + 1) // 2
    filters = list(base.conv_filters[:n_conv])
    while len(filters) < n_conv:
        filters.append(filters[-1] * 2)
    unit = base.dense_units[0] if base.dense_units else 16
    return replace(base, conv_filters=tuple(filters), trailing_pool=conv_layers % 2 == 0,
                   dense_units=(unit,) * dense_layers)


def shape_trace(config: SegNetConfig) -> Sequence[tuple]:
    return build_segnet(config).shape_trace()
