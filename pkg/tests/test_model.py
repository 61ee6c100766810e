import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from segfire.exceptions import BuildError, InvalidInputError
from segfire.model import (
    SegNetConfig,
    TrainOptions,
    build_segnet,
    classify,
    encode_labels,
    param_count,
    shape_trace,
    split_validation,
    sweep_config,
    train,
    zero_parameters,
)
from segfire.nn import ConvLayer, DenseLayer, FlattenLayer, PoolLayer

DOWNSAMPLE_TRACE = [(240, 320, 3), (120, 160, 32), (60, 80, 32), (30, 40, 64), (15, 20, 64), (8, 10, 128),
                    (10240,), (16,), (16,), (1,)]
PRESERVE_TRACE = [(240, 320, 3), (120, 160, 32), (120, 160, 32), (60, 80, 64), (60, 80, 64), (30, 40, 128),
                  (153600,), (16,), (16,), (1,)]


@pytest.fixture(scope="module")
def downsample():
    return build_segnet(SegNetConfig(), initialise=False)


@pytest.fixture(scope="module")
def preserve():
    return build_segnet(SegNetConfig(pool_mode="preserve"), initialise=False)


def test_downsample_trace(downsample):
    assert downsample.shape_trace() == DOWNSAMPLE_TRACE


def test_preserve_trace(preserve):
    assert preserve.shape_trace() == PRESERVE_TRACE


def test_layer_list_matches_architecture(downsample):
    kinds = [type(l) for l in downsample.layers]
    assert kinds == [ConvLayer, PoolLayer, ConvLayer, PoolLayer, ConvLayer, FlattenLayer,
                     DenseLayer, DenseLayer, DenseLayer]
    convs = [l for l in downsample.layers if isinstance(l, ConvLayer)]
    assert [c.filters for c in convs] == [32, 64, 128]
    assert all(c.kernel_size == 3 and c.stride == 2 and c.activation == "relu" for c in convs)
    pools = [l for l in downsample.layers if isinstance(l, PoolLayer)]
    assert all(p.pool_size == 2 and p.stride == 2 for p in pools)
    dense = downsample.dense_layers()
    assert [d.units for d in dense] == [16, 16, 1]
    assert [d.activation for d in dense] == ["relu", "relu", "linear"]


def test_param_counts_preserve(preserve):
    per_layer, total = param_count(preserve)
    assert [per_layer[n] for n in ("conv1", "conv2", "conv3", "dense1", "dense2", "output")] == \
        [896, 18_496, 73_856, 2_457_616, 272, 17]
    assert per_layer["pool1"] == per_layer["flatten"] == 0
    assert total == sum(per_layer.values())


def test_param_counts_downsample(downsample):
    per_layer, _ = param_count(downsample)
    assert per_layer["dense1"] == 16 * (10_240 + 1) == 163_856
    assert (per_layer["conv1"], per_layer["conv2"], per_layer["conv3"]) == (896, 18_496, 73_856)


def test_shape_only_model_allocates_nothing(preserve):
    w = preserve.dense_layers()[0].weights
    assert w.shape == (153_600, 16) and w.strides == (0, 0)


@settings(max_examples=25, deadline=None)
@given(h=st.integers(8, 40), w=st.integers(8, 40), c=st.integers(1, 4),
       filters=st.lists(st.integers(1, 8), min_size=1, max_size=3),
       dense=st.lists(st.integers(1, 6), max_size=3), kernel=st.integers(1, 3),
       mode=st.sampled_from(["downsample", "preserve"]))
def test_param_identities_for_random_configs(h, w, c, filters, dense, kernel, mode):
    cfg = SegNetConfig(input_shape=(h, w, c), conv_filters=tuple(filters), kernel=kernel,
                       dense_units=tuple(dense), pool_mode=mode)
    try:
        model = build_segnet(cfg, initialise=False)
    except BuildError:
        return
    shapes = model.shape_trace()
    per_layer, _ = param_count(model)
    channels = c
    for layer, in_shape in zip(model.layers, shapes):
        if isinstance(layer, ConvLayer):
            assert per_layer[layer.name] == layer.filters * (channels * kernel * kernel + 1)
            channels = layer.filters
        elif isinstance(layer, DenseLayer):
            n = int(np.prod(in_shape))
            assert per_layer[layer.name] == n * layer.units + layer.units


def test_collapsing_config_is_build_error():
    with pytest.raises(BuildError):
        build_segnet(SegNetConfig(input_shape=(4, 4, 3)))


def test_initialisation_is_seeded():
    a, b = build_segnet(SegNetConfig(seed=5)), build_segnet(SegNetConfig(seed=5))
    for p, q in zip(a.parameters(), b.parameters()):
        assert p.tobytes() == q.tobytes()


def test_initial_variance(small_model):
    conv = small_model.layers[0]
    fan_in = conv.kernels[0].size
    assert abs(conv.kernels.var() - 2.0 / fan_in) < 0.5 * 2.0 / fan_in


class TestClassify:
    def test_zero_model_fires_on_boundary(self, small_model):
        zero_parameters(small_model)
        label, score = classify(small_model, np.zeros(small_model.input_shape, dtype=np.uint8))
        assert (label, score) == ("fire", 0.0)

    def test_sign_rule(self, small_model):
        out = small_model.layers[-1]
        zero_parameters(small_model)
        out.bias[:] = -0.1
        small_model.mark_modified()
        assert classify(small_model, np.zeros(small_model.input_shape))[0] == "nonfire"
        out.bias[:] = 2.3
        small_model.mark_modified()
        assert classify(small_model, np.zeros(small_model.input_shape)) == ("fire", 2.3)

    def test_shape_mismatch(self, small_model):
        with pytest.raises(InvalidInputError):
            classify(small_model, np.zeros((240, 320, 3)))


def test_encode_labels():
    np.testing.assert_array_equal(encode_labels(["fire", "nonfire", 1, -1]), [1, -1, 1, -1])
    with pytest.raises(InvalidInputError):
        encode_labels(["smoke"])


def test_split_validation_deterministic():
    x = np.arange(50)
    a = split_validation(x, x, 0.2, seed=1)
    b = split_validation(x, x, 0.2, seed=1)
    assert len(a[2]) == 10 and len(a[0]) == 40
    np.testing.assert_array_equal(a[2], b[2])
    assert set(a[0]) | set(a[2]) == set(range(50))


def _toy_data(n, shape, seed):
    """Bright-red-square images versus plain noise."""
    r = np.random.default_rng(seed)
    x = (r.random((n, *shape)) * 80).astype(np.uint8)
    y = np.array([1 if i % 2 else -1 for i in range(n)])
    for i in np.where(y > 0)[0]:
        top, left = r.integers(0, shape[0] - 8), r.integers(0, shape[1] - 8)
        x[i, top:top + 8, left:left + 8] = (255, 160, 40)
    return x, y


class TestTrain:
    def test_zero_epochs_is_noop(self, small_model):
        before = [p.copy() for p in small_model.parameters()]
        x, y = _toy_data(8, small_model.input_shape, 0)
        _, history = train(small_model, (x, y), epochs=0)
        assert len(history) == 0
        for a, b in zip(before, small_model.parameters()):
            np.testing.assert_array_equal(a, b)

    def test_empty_dataset(self, small_model):
        with pytest.raises(InvalidInputError):
            train(small_model, (np.zeros((0, *small_model.input_shape)), []))

    def test_bad_batch_size(self, small_model):
        x, y = _toy_data(4, small_model.input_shape, 0)
        with pytest.raises(InvalidInputError):
            train(small_model, (x, y), batch_size=0)

    def test_unknown_enhancement(self, small_model):
        x, y = _toy_data(4, small_model.input_shape, 0)
        with pytest.raises(InvalidInputError):
            train(small_model, (x, y), enhancements=["dropout"])

    def test_learns_toy_problem(self, small_config):
        x, y = _toy_data(120, small_config.input_shape, 1)
        xv, yv = _toy_data(40, small_config.input_shape, 2)
        _, history = train(build_segnet(small_config), (x, y), (xv, yv), epochs=8, batch_size=8,
                           options=TrainOptions(lr=0.01))
        assert history.records[-1].val_accuracy >= 0.9
        for r in history.records:
            assert 0 <= r.train_accuracy <= 1 and 0 <= r.val_accuracy <= 1
            assert r.train_loss >= 0 and r.val_loss >= 0
        assert [r.epoch for r in history.records] == list(range(len(history)))

    def test_same_seed_same_history(self, small_config):
        x, y = _toy_data(32, small_config.input_shape, 3)
        runs = [train(build_segnet(small_config), (x, y), epochs=2,
                      enhancements=["augmentation", "l2_regularization"])[1] for _ in range(2)]
        assert runs[0].records == runs[1].records

    def test_early_stopping_never_longer(self, small_config):
        x, y = _toy_data(32, small_config.input_shape, 4)
        opts = TrainOptions(lr=0.02, patience=1)
        _, plain = train(build_segnet(small_config), (x, y), epochs=6, options=opts)
        _, early = train(build_segnet(small_config), (x, y), epochs=6, enhancements=["early_stopping"], options=opts)
        assert len(early) <= len(plain)

    def test_flags_recorded(self, small_model):
        x, y = _toy_data(8, small_model.input_shape, 0)
        _, history = train(small_model, (x, y), epochs=1, enhancements=["l2_regularization"])
        assert history.flags == {"plain": False, "early_stopping": False, "augmentation": False,
                                 "l2_regularization": True}


class TestSweepConfig:
    def test_baseline_cell_is_default(self):
        assert sweep_config(SegNetConfig(), 5, 2) == SegNetConfig()

    def test_even_depth_adds_trailing_pool(self):
        cfg = sweep_config(SegNetConfig(), 6, 1)
        assert cfg.conv_filters == (32, 64, 128) and cfg.trailing_pool and cfg.dense_units == (16,)
        assert cfg.weighted_layers == 6

    def test_filters_double(self):
        cfg = sweep_config(SegNetConfig(), 11, 3)
        assert cfg.conv_filters == (32, 64, 128, 256, 512, 1024)
        assert cfg.weighted_layers == 11

    def test_deep_downsample_cell_collapses(self):
        with pytest.raises(BuildError):
            shape_trace(sweep_config(SegNetConfig(), 11, 1))
