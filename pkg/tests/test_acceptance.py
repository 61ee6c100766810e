"""Acceptance criteria 1 to 9.

Each test carries a ``criterion`` marker; the terminal summary prints one
PASS/FAIL line per criterion.  Tolerances are the stated ones, unrelaxed.
"""

import json
import time
from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from segfire.analysis import (
    ConfusionCounts,
    complexity_report,
    discrepancy_report,
    metrics,
    reference_column_totals,
)
from segfire.bench import read_bench_csv
from segfire.cli import main
from segfire.estimator import SegNetClassifier
from segfire.imaging import RasterImage, generate_dataset, reassemble, segment
from segfire.model import SegNetConfig, TrainOptions, build_segnet, encode_labels, evaluate, train
from segfire.nn import (
    ConvLayer,
    DenseLayer,
    FlattenLayer,
    HingeLossConfig,
    ModelGraph,
    PoolLayer,
    finite_difference_check,
)
from segfire.pipeline import (
    ALERT,
    CONTINUE,
    REPROCESSED,
    DecisionArray,
    JsonlSink,
    SamplerConfig,
    decide,
    run_pipeline,
    sample_frames,
    scripted_stream,
)

TABLE_ORDER = ("conv1", "conv2", "conv3", "dense1", "dense2", "output")


@pytest.fixture(scope="module")
def preserve_report():
    model = build_segnet(SegNetConfig(pool_mode="preserve"), initialise=False)
    report = complexity_report(model)
    return report, discrepancy_report(report)


# -- 1 -----------------------------------------------------------------------

@pytest.mark.criterion(1, "parameter column and conv model-space bytes")
def test_c1_parameter_counts(tmp_path):
    out = tmp_path / "complexity.json"
    start = time.perf_counter()
    assert main(["complexity", "--pool-mode", "preserve", "--format", "json", "--out", str(out)]) == 0
    elapsed = time.perf_counter() - start
    rows = {r["name"]: r for r in json.loads(out.read_text())["layers"]}
    assert [rows[n]["parameters"] for n in TABLE_ORDER] == [896, 18_496, 73_856, 2_457_616, 272, 17]
    assert [rows[n]["model_space"] for n in ("conv1", "conv2", "conv3")] == [7_168, 147_968, 590_848]
    assert elapsed < 1.0


# -- 2 -----------------------------------------------------------------------

@pytest.mark.criterion(2, "dense ops, reference column totals, every cell classified")
def test_c2_dense_ops(preserve_report):
    report, _ = preserve_report
    assert [report.layer(n).operations for n in ("dense1", "dense2", "output")] == [4_915_200, 512, 32]


@pytest.mark.criterion(2, "dense ops, reference column totals, every cell classified")
def test_c2_reference_totals():
    totals = reference_column_totals()
    assert totals["operational_space"] == 44_177_408
    assert totals["operations"] == 19_275_424


@pytest.mark.criterion(2, "dense ops, reference column totals, every cell classified")
def test_c2_all_cells_classified(preserve_report):
    _, diff = preserve_report
    keys = {(c.layer, c.column) for c in diff.cells}
    assert len(keys) == len(diff.cells) == 24
    assert all(isinstance(c.match, bool) for c in diff.cells)
    assert len(diff.matches) + len(diff.mismatches) == 24


# -- 3 -----------------------------------------------------------------------

@pytest.mark.criterion(3, "metrics from published confusion counts")
def test_c3_metrics():
    m = metrics(ConfusionCounts(tp=235, tn=198, fp=5, fn=3))
    assert abs(float(m.accuracy) - 0.98185) <= 1e-5
    assert m.precision == Fraction(235, 240)
    assert m.recall == Fraction(235, 238)
    assert m.fpr == Fraction(5, 203)
    assert m.fnr == Fraction(3, 238)
    assert m.tnr == Fraction(198, 203)


# -- 4 -----------------------------------------------------------------------

def _random_instance(rng, i):
    """One randomized gradient-check problem; the kind cycles through every layer type."""
    kind = ("conv", "pool_downsample", "pool_preserve", "dense", "segnet")[i % 5]
    h, w, c = int(rng.integers(4, 10)), int(rng.integers(4, 10)), int(rng.integers(1, 4))

    def head(n_in):
        return [FlattenLayer(), DenseLayer(rng.normal(size=(n_in, 1)) / np.sqrt(n_in), rng.normal(size=1) * 0.1,
                                           activation="linear", name="output")]

    if kind == "conv":
        k, kh, stride = int(rng.integers(1, 5)), int(rng.choice([1, 3, 5])), int(rng.integers(1, 3))
        conv = ConvLayer(rng.normal(size=(k, c, kh, kh)) * 0.5, rng.normal(size=k) * 0.1, stride=stride,
                         name="conv1")
        probe = ModelGraph([conv], (h, w, c))
        oh, ow, _ = probe.shape_trace()[-1]
        model = ModelGraph([conv, *head(oh * ow * k)], (h, w, c))
    elif kind.startswith("pool"):
        mode = kind.split("_")[1]
        conv = ConvLayer(rng.normal(size=(2, c, 3, 3)), rng.normal(size=2) * 0.1, name="conv1")
        pool = PoolLayer(2, 2, mode=mode, name="pool1")
        oh, ow, _ = ModelGraph([conv, pool], (h, w, c)).shape_trace()[-1]
        model = ModelGraph([conv, pool, *head(oh * ow * 2)], (h, w, c))
    elif kind == "dense":
        n1 = int(rng.integers(2, 8))
        hidden = DenseLayer(rng.normal(size=(h * w * c, n1)) / np.sqrt(h * w * c), rng.normal(size=n1) * 0.1,
                            name="dense1")
        model = ModelGraph([FlattenLayer(), hidden,
                            DenseLayer(rng.normal(size=(n1, 1)), np.zeros(1), activation="linear", name="output")],
                           (h, w, c))
    else:
        cfg = SegNetConfig(input_shape=(h + 8, w + 8, 3), conv_filters=tuple(int(v) for v in rng.integers(1, 5, 3)),
                           dense_units=tuple(int(v) for v in rng.integers(2, 6, 2)),
                           pool_mode=str(rng.choice(["downsample", "preserve"])), seed=int(rng.integers(1 << 30)))
        model = build_segnet(cfg)
    batch = int(rng.integers(1, 4))
    x = rng.random((batch, *model.input_shape))
    labels = rng.choice([-1.0, 1.0], size=batch)
    config = HingeLossConfig(penalty_C=float(rng.uniform(0.5, 2)), l2_lambda=float(rng.uniform(0, 0.1)),
                             l2_scope=str(rng.choice(["output", "dense"])))
    return model, x, labels, config


@pytest.mark.slow
@pytest.mark.criterion(4, "finite-difference gradients below 1e-5 relative error")
def test_c4_gradient_check():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst, instances, kinds = 0.0, 0, set()
    for i in range(48):
        model, x, labels, config = _random_instance(rng, i)
        report = finite_difference_check(model, x, labels, config, epsilon=1e-5, samples=10, seed=i)
        assert sum(r["checked"] for r in report.values()) > 0
        worst = max(worst, *(r["max_rel_error"] for r in report.values()))
        kinds.update(layer.kind for layer in model.layers)
        instances += 1
    # the full-size network in both pooling modes
    for mode in ("downsample", "preserve"):
        model = build_segnet(SegNetConfig(pool_mode=mode, seed=instances))
        x = rng.random((1, 240, 320, 3))
        report = finite_difference_check(model, x, [1.0], epsilon=1e-5, samples=8, seed=instances)
        assert all(r["checked"] > 0 for r in report.values())
        worst = max(worst, *(r["max_rel_error"] for r in report.values()))
        instances += 1
    elapsed = time.perf_counter() - start
    print(f"gradient check: {instances} instances, max relative error {worst:.3e}, {elapsed:.1f} s")
    assert instances >= 50
    assert kinds == {"conv", "pool", "flatten", "dense"}
    assert worst < 1e-5
    assert elapsed < 300


# -- 5 -----------------------------------------------------------------------

@pytest.mark.criterion(5, "segment/reassemble identity and exhaustive decide")
def test_c5_segment_round_trip():
    rng = np.random.default_rng(5)
    for _ in range(100):
        img = RasterImage(rng.integers(0, 256, size=(720, 1280, 3), dtype=np.uint8))
        grid = segment(img)
        assert len(grid) == 12
        assert reassemble(grid).pixels.tobytes() == img.pixels.tobytes()


@pytest.mark.criterion(5, "segment/reassemble identity and exhaustive decide")
def test_c5_decide_exhaustive():
    seen = 0
    for bits in product((False, True), repeat=12):
        count = sum(bits)
        expected = CONTINUE if count == 0 else ("reprocess" if count == 1 else ALERT)
        d = decide(DecisionArray(bits))
        assert d.action == expected
        if count == 1:
            assert d.tile == bits.index(True)
        seen += 1
    assert seen == 4096


# -- 6 -----------------------------------------------------------------------

@pytest.fixture(scope="module")
def desk_run():
    """Train on 2,000 synthetic tiles with every enhancement; score 400 held-out tiles."""
    start = time.perf_counter()
    x_train, y_train, _ = generate_dataset(2000, seed=11)
    x_val, y_val, _ = generate_dataset(400, seed=12)
    x_test, y_test, _ = generate_dataset(400, seed=13)
    est = SegNetClassifier(epochs=3, enhancements=("early_stopping", "augmentation", "l2_regularization"), seed=0)
    est.fit(x_train, y_train, x_val, y_val)
    accuracy = est.score(x_test, y_test)
    elapsed = time.perf_counter() - start
    print(f"desk-scale run: {len(x_train)} tiles, {len(est.history_.records)} epochs, "
          f"held-out accuracy {accuracy:.4f} on {len(x_test)} tiles, {elapsed:.0f} s")
    return est, accuracy, elapsed, len(x_test)


@pytest.mark.slow
@pytest.mark.criterion(6, "desk-scale training accuracy and L2 gap direction")
def test_c6_desk_scale_training(desk_run):
    est, accuracy, elapsed, n_test = desk_run
    assert len(est.history_.records) <= 15
    assert n_test >= 400
    assert accuracy >= 0.95
    assert elapsed < 30 * 60


@pytest.mark.slow
@pytest.mark.criterion(6, "desk-scale training accuracy and L2 gap direction")
def test_c6_l2_narrows_gap():
    # A small training set invites overfitting.  Each seed trains a plain and
    # an L2 model from the same initial weights; the gaps are averaged.
    x, y, _ = generate_dataset(32, seed=21, width=64, height=48)
    xv, yv, _ = generate_dataset(200, seed=22, width=64, height=48)
    y_signed, yv_signed = encode_labels(y), encode_labels(yv)
    gaps = {"plain": [], "l2": []}
    for seed in range(4):
        cfg = SegNetConfig(input_shape=(48, 64, 3), conv_filters=(8, 16, 16), dense_units=(16, 16), seed=seed)
        for name, loss, enhancements in (
            ("plain", HingeLossConfig(l2_lambda=0.0), []),
            ("l2", HingeLossConfig(l2_lambda=0.25, l2_scope="dense"), ["l2_regularization"]),
        ):
            model, _ = train(build_segnet(cfg), (x, y), (xv, yv), epochs=15, batch_size=8,
                             enhancements=enhancements, config=loss, options=TrainOptions(lr=0.01, seed=seed))
            train_acc, _ = evaluate(model, x, y_signed, loss)
            val_acc, _ = evaluate(model, xv, yv_signed, loss)
            gaps[name].append(train_acc - val_acc)
    plain, l2 = np.mean(gaps["plain"]), np.mean(gaps["l2"])
    print(f"mean train/validation gap: plain {plain:.4f}, L2 {l2:.4f}")
    assert l2 < plain


# -- 7 -----------------------------------------------------------------------

@pytest.mark.slow
@pytest.mark.criterion(7, "pipeline golden trace on the scripted stream")
def test_c7_golden_trace(desk_run, tmp_path):
    est = desk_run[0]
    stream = scripted_stream(60, seed=0)
    assert [f.index for f in sample_frames(stream, SamplerConfig(keep_every=20, fps=60))] == [0, 20, 40]
    logs = []
    for run in range(2):
        path = tmp_path / f"run{run}.jsonl"
        with JsonlSink(path) as sink:
            events = run_pipeline(scripted_stream(60, seed=0), est, SamplerConfig(20, 60), sink)
        logs.append(path.read_bytes())
    assert logs[0] == logs[1]
    assert [(e.frame, e.action) for e in events] == [(0, CONTINUE), (20, REPROCESSED), (40, ALERT)]
    assert events[1].tile == 5 and events[1].confirmed is True
    assert [e.alert for e in events] == [False, True, True]


# -- 8 -----------------------------------------------------------------------

@pytest.mark.criterion(8, "tile Dense-1 parameters are 1/12 of the whole-image model's")
def test_c8_dense1_ratio():
    tile = complexity_report(build_segnet(SegNetConfig(pool_mode="preserve"), initialise=False))
    whole = complexity_report(build_segnet(SegNetConfig(input_shape=(720, 1280, 3), pool_mode="preserve"),
                                           initialise=False))
    tile_d1, whole_d1 = tile.layer("dense1").parameters, whole.layer("dense1").parameters
    assert tile_d1 == 2_457_616
    assert whole_d1 == 29_491_216 == 16 * (1_843_200 + 1)
    print(f"Dense-1 parameters: tile {tile_d1:,}, whole image {whole_d1:,}, "
          f"ratio {Fraction(tile_d1, whole_d1)}")
    assert Fraction(tile_d1, whole_d1) == Fraction(1, 12)


# -- 9 -----------------------------------------------------------------------

@pytest.mark.slow
@pytest.mark.criterion(9, "bench CSV ratio and non-decreasing latency")
def test_c9_bench(tmp_path):
    out = tmp_path / "bench.csv"
    assert main(["bench", "--batch-sizes", "1,8,32,64", "--repetitions", "3", "--out", str(out)]) == 0
    rows = read_bench_csv(out.read_text())
    assert [r["batch_size"] for r in rows] == [1, 8, 32, 64]
    for r in rows:
        assert r["per_complete_image_ms"] == pytest.approx(12 * r["per_segment_ms"], rel=1e-12)
    totals = [r["mean_ms"] for r in rows]
    assert all(a <= b for a, b in zip(totals, totals[1:])), totals
