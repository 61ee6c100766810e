"""Command-line entry point: ``segfire <command> [options]``.

Every option can also come from a JSON config file given with
``--config``; keys are the option names with dashes replaced by
underscores (``{"batch_size": 8, "pool_mode": "preserve"}``).  Options on
the command line override the file.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .exceptions import FormatError, SegfireError

log = logging.getLogger("segfire")

COMMANDS = ("synth", "train", "eval", "infer", "pipeline", "complexity", "bench", "sweep")
ENHANCEMENT_FLAGS = {"early-stop": "early_stopping", "augment": "augmentation", "l2": "l2_regularization"}


class UsageError(Exception):
    """Bad arguments or config; maps to exit code 2."""


def _int_list(text):
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _enhancements(values):
    if values is None:
        return list(ENHANCEMENT_FLAGS.values())
    if isinstance(values, str):
        values = values.split(",")
    out = []
    for v in values:
        v = v.strip()
        if v in ("none", "plain"):
            continue
        if v in ENHANCEMENT_FLAGS:
            out.append(ENHANCEMENT_FLAGS[v])
        elif v in ENHANCEMENT_FLAGS.values():
            out.append(v)
        else:
            raise UsageError(f"unknown enhancement {v!r}; choose from none, {', '.join(ENHANCEMENT_FLAGS)}")
    return out


def _common(p):
    p.add_argument("--config", help="JSON file with option values")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output file or directory")
    p.add_argument("--log-level", default="WARNING")


def _training_opts(p):
    p.add_argument("--epochs", type=int, default=15)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--lr", type=float, default=0.003)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--pool-mode", choices=("downsample", "preserve"), default="downsample")
    p.add_argument("--enhancements", nargs="+", default=None,
                   help="any of none, early-stop, augment, l2 (default: all three)")
    p.add_argument("--penalty-c", type=float, default=1.0)
    p.add_argument("--l2-lambda", type=float, default=0.01)
    p.add_argument("--l2-scope", choices=("output", "dense"), default="output")
    p.add_argument("--patience", type=int, default=3)


def build_parser():
    parser = argparse.ArgumentParser(prog="segfire", description="Segmented wildfire detection toolkit")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("synth", help="generate a synthetic dataset with a manifest")
    _common(p)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--fire-ratio", type=float, default=0.5)
    p.add_argument("--scenes", action="store_true", help="write 1280x720 scenes instead of 320x240 tiles")
    p.add_argument("--format", choices=("ppm", "png"), default="ppm")

    p = sub.add_parser("train", help="train a tile classifier from a manifest")
    _common(p)
    _training_opts(p)
    p.add_argument("--manifest", required=False)
    p.add_argument("--val-manifest")
    p.add_argument("--weights", help="where to save the trained weights")
    p.add_argument("--history", help="CSV file for per-epoch metrics")

    p = sub.add_parser("eval", help="score a model on a manifest, or tally a predictions file")
    _common(p)
    p.add_argument("--manifest")
    p.add_argument("--weights")
    p.add_argument("--predictions", help="CSV with prediction,label columns")
    p.add_argument("--skip-missing", action="store_true")

    p = sub.add_parser("infer", help="classify one image")
    _common(p)
    p.add_argument("image")
    p.add_argument("--weights")

    p = sub.add_parser("pipeline", help="run the frame-stream workflow")
    _common(p)
    p.add_argument("--frames", help="directory of frames named 000000.ppm, 000001.ppm, ...")
    p.add_argument("--scripted", type=int, metavar="N", help="use an N-frame scripted synthetic stream")
    p.add_argument("--weights")
    p.add_argument("--keep-every", type=int, default=20)
    p.add_argument("--fps", type=int, default=60)

    p = sub.add_parser("complexity", help="layer memory and operation report")
    _common(p)
    p.add_argument("--pool-mode", choices=("downsample", "preserve"), default="downsample")
    p.add_argument("--input-shape", type=_int_list, default=[240, 320, 3], help="height,width,channels")
    p.add_argument("--format", choices=("text", "csv", "json"), default="text")
    p.add_argument("--element-bytes", type=int, default=8)

    p = sub.add_parser("bench", help="forward-pass latency per batch size")
    _common(p)
    p.add_argument("--weights")
    p.add_argument("--pool-mode", choices=("downsample", "preserve"), default="downsample")
    p.add_argument("--batch-sizes", type=_int_list, default=[1, 8, 32, 64])
    p.add_argument("--repetitions", type=int, default=10)
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("sweep", help="train and time a grid of network depths")
    _common(p)
    _training_opts(p)
    p.add_argument("--manifest")
    p.add_argument("--test-manifest")
    p.add_argument("--conv-range", type=_int_list, default=[5, 6, 7, 9, 11])
    p.add_argument("--dense-range", type=_int_list, default=[1, 2, 3])
    return parser


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            values = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}")
        if not isinstance(values, dict):
            raise UsageError("config file must hold a JSON object")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(values) - known
        if unknown:
            raise UsageError(f"unknown config keys for {args.command}: {sorted(unknown)}")
        sub.set_defaults(**values)
        args = parser.parse_args(argv)
    return args


# -- helpers -----------------------------------------------------------------

def _emit(text, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load_model(args, pool_mode="downsample"):
    from .model import SegNetConfig, build_segnet
    from .weights import load_weights

    if getattr(args, "weights", None):
        return load_weights(args.weights)
    log.warning("no --weights given; using an untrained network")
    return build_segnet(SegNetConfig(pool_mode=pool_mode, seed=args.seed))


def _load_dataset(manifest_path, shape=(240, 320), skip_missing=False):
    from .imaging import load_image, resize_array
    from .manifest import load_manifest, resolve

    entries = load_manifest(manifest_path, skip_missing=skip_missing)
    images = []
    for e in entries:
        px = load_image(resolve(e, manifest_path)).pixels
        if px.shape[:2] != shape:
            px = resize_array(px, shape[1], shape[0])
        images.append(px)
    x = np.stack(images) if images else np.zeros((0, *shape, 3), np.uint8)
    return x, [e.label for e in entries]


def _loss_config(args):
    from .nn import HingeLossConfig

    return HingeLossConfig(penalty_C=args.penalty_c, l2_lambda=args.l2_lambda, l2_scope=args.l2_scope)


# -- commands ----------------------------------------------------------------

def cmd_synth(args):
    from .imaging import RasterImage, generate_dataset, generate_scene, save_image
    from .manifest import ManifestEntry, write_manifest

    if args.count < 0:
        raise UsageError("--count must be >= 0")
    out = Path(args.out or "synth")
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    if args.scenes:
        n_fire = int(round(args.fire_ratio * args.count))
        flags = np.array([True] * n_fire + [False] * (args.count - n_fire))
        np.random.default_rng(args.seed).shuffle(flags)
        items = []
        for i, fire in enumerate(flags):
            img, label = generate_scene(args.seed * 1_000_003 + i, bool(fire))
            items.append((img.pixels, label))
    else:
        x, y, _ = generate_dataset(args.count, args.fire_ratio, seed=args.seed)
        items = list(zip(x, y))
    for i, (px, label) in enumerate(items):
        name = f"{i:06d}.{args.format}"
        save_image(RasterImage(px), out / name)
        entries.append(ManifestEntry(name, label, "synthetic"))
    write_manifest(entries, out / "manifest.csv")
    print(f"wrote {len(entries)} images and {out / 'manifest.csv'}")
    return 0


def cmd_train(args):
    from .model import SegNetConfig, TrainOptions, build_segnet, train
    from .weights import save_weights

    if not args.manifest:
        raise UsageError("train needs --manifest")
    enhancements = _enhancements(args.enhancements)
    x, y = _load_dataset(args.manifest)
    val = _load_dataset(args.val_manifest) if args.val_manifest else None
    config = SegNetConfig(pool_mode=args.pool_mode, loss=_loss_config(args), seed=args.seed)
    model, history = train(build_segnet(config), (x, y), val, epochs=args.epochs, batch_size=args.batch_size,
                           enhancements=enhancements, config=config.loss,
                           options=TrainOptions(lr=args.lr, momentum=args.momentum, patience=args.patience,
                                                seed=args.seed))
    for r in history.records:
        print(f"epoch {r.epoch}: train acc {r.train_accuracy:.4f} loss {r.train_loss:.4f}, "
              f"val acc {r.val_accuracy:.4f} loss {r.val_loss:.4f}")
    if args.history:
        with open(args.history, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["epoch", "train_accuracy", "val_accuracy", "train_loss", "val_loss"],
                               lineterminator="\n")
            w.writeheader()
            w.writerows(history.as_rows())
    weights = args.weights or args.out or "segnet.segw"
    save_weights(model, weights)
    print(f"saved weights to {weights}")
    return 0


def read_predictions(path):
    """Read a ``prediction,label`` CSV; returns the two columns."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if rows and not {"prediction", "label"} <= set(rows[0]):
        raise FormatError(f"{path}: expected columns prediction,label")
    return [r["prediction"].strip() for r in rows], [r["label"].strip() for r in rows]


def format_metrics(counts, report):
    lines = [f"TP={counts.tp} TN={counts.tn} FP={counts.fp} FN={counts.fn} total={counts.total}"]
    for name, value in report.as_floats().items():
        exact = getattr(report, name)
        lines.append(f"{name:<9} {'undefined' if value is None else f'{value:.6f}'}"
                     f"{'' if exact is None else f'  ({exact})'}")
    return "\n".join(lines) + "\n"


def cmd_eval(args):
    from .analysis import confusion, metrics
    from .model import as_float_batch
    from .nn import predict_scores

    if args.predictions:
        preds, labels = read_predictions(args.predictions)
    elif args.manifest:
        x, labels = _load_dataset(args.manifest, skip_missing=args.skip_missing)
        scores = predict_scores(_load_model(args), as_float_batch(x))
        preds = ["fire" if s >= 0 else "nonfire" for s in scores]
    else:
        raise UsageError("eval needs --predictions or --manifest")
    counts = confusion(preds, labels)
    _emit(format_metrics(counts, metrics(counts)), args.out)
    return 0


def cmd_infer(args):
    from .imaging import load_image
    from .model import classify
    from .pipeline import FRAME_HEIGHT, FRAME_WIDTH, decide, evaluate_frame

    model = _load_model(args)
    image = load_image(args.image)
    h, w = model.input_shape[:2]
    if (image.height, image.width) == (h, w):
        label, score = classify(model, image.pixels)
        print(f"{label} {score:.6f}")
        return 0
    if (image.width, image.height) != (FRAME_WIDTH, FRAME_HEIGHT):
        log.warning("resizing %dx%d image to %dx%d", image.width, image.height, FRAME_WIDTH, FRAME_HEIGHT)
    array = evaluate_frame(image, model)
    print("verdicts " + "".join("F" if v else "." for v in array.verdicts))
    print("scores " + " ".join(f"{s:.4f}" for s in array.scores))
    print(f"action {decide(array).action}")
    return 0


def cmd_pipeline(args):
    from .pipeline import FrameStream, JsonlSink, SamplerConfig, run_pipeline, scripted_stream

    if args.frames:
        stream = FrameStream.from_directory(args.frames, fps=args.fps)
    elif args.scripted:
        stream = scripted_stream(args.scripted, seed=args.seed, fps=args.fps)
    else:
        raise UsageError("pipeline needs --frames or --scripted")
    model = _load_model(args)
    sampler = SamplerConfig(args.keep_every, args.fps)
    if args.out:
        with JsonlSink(args.out) as sink:
            events = run_pipeline(stream, model, sampler, sink)
    else:
        events = run_pipeline(stream, model, sampler)
        for e in events:
            print(e.to_json())
    alerts = sum(e.alert for e in events)
    print(f"{len(events)} frames processed, {alerts} alerts", file=sys.stderr)
    return 0


def cmd_complexity(args):
    from .analysis import model_complexity_report, reference_column_totals, report_dict
    from .model import SegNetConfig, build_segnet

    if len(args.input_shape) != 3:
        raise UsageError("--input-shape needs height,width,channels")
    model = build_segnet(SegNetConfig(input_shape=tuple(args.input_shape), pool_mode=args.pool_mode),
                         initialise=False)
    report, diff = model_complexity_report(model, args.element_bytes)
    if args.format == "csv":
        text = report.to_csv() + ("\n" + diff.to_csv() if diff else "")
    elif args.format == "json":
        data = report_dict(report)
        if diff:
            data["discrepancies"] = [dict(vars(c), abs_diff=c.abs_diff) for c in diff.cells]
            data["reference_totals"] = reference_column_totals()
        text = json.dumps(data, indent=2) + "\n"
    else:
        text = report.to_text()
        if diff:
            totals = reference_column_totals()
            text += "\n" + diff.to_text()
            text += (f"reference column totals: operational space {totals['operational_space']:,} bytes, "
                     f"operations {totals['operations']:,}\n")
    _emit(text, args.out)
    return 0


def cmd_bench(args):
    from .bench import bench_csv, bench_latency

    model = _load_model(args, args.pool_mode)
    results = bench_latency(model, args.batch_sizes, args.repetitions, seed=args.seed, threads=args.threads)
    _emit(bench_csv(results), args.out)
    return 0


def cmd_sweep(args):
    from .model import SegNetConfig, TrainOptions
    from .sweep import sweep

    if not args.manifest or not args.test_manifest:
        raise UsageError("sweep needs --manifest and --test-manifest")
    enhancements = _enhancements(args.enhancements)
    grid = sweep(_load_dataset(args.manifest), _load_dataset(args.test_manifest), args.conv_range,
                 args.dense_range, SegNetConfig(pool_mode=args.pool_mode, loss=_loss_config(args), seed=args.seed),
                 epochs=args.epochs, batch_size=args.batch_size, enhancements=enhancements,
                 options=TrainOptions(lr=args.lr, momentum=args.momentum, patience=args.patience, seed=args.seed))
    sys.stdout.write(grid.to_text())
    if args.out:
        Path(args.out).write_text(grid.to_csv())
    return 0


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"segfire: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return globals()[f"cmd_{args.command}"](args)
    except UsageError as exc:
        print(f"segfire: error: {exc}", file=sys.stderr)
        return 2
    except (SegfireError, OSError) as exc:
        print(f"segfire: {args.command} failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
