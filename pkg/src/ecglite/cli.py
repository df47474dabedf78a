"""The ``ecglite`` command: preprocess, segment, train, evaluate, infer, bench.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Flags override values from an optional key=value --config file; every
randomized step takes an explicit --seed (no wall-clock seeding).
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import dsp, evaluation, model_store, wfdb_io
from .nn import TrainConfig, TrainingDiverged, build_model, train

DATA_DIR_ENV = "ECGLITE_DATA_DIR"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

# published deployment reference for the bench report (informational only)
REFERENCE_LATENCY_MS = 5.127
REFERENCE_MODEL_MB = 0.16


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); we reserve 2 for data errors
        raise UsageError(message)


def _read_config(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    file = Path(path)
    if not file.is_file():
        raise UsageError(f"config file not found: {path}")
    entries = {}
    for line in file.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"bad config line (need key=value): {line!r}")
        key, value = line.split("=", 1)
        entries[key.strip().replace("-", "_")] = value.strip()
    return entries


def _resolve(args: argparse.Namespace, config: dict[str, str], defaults: dict) -> None:
    """Fill unset flags from the config file, then from hard defaults."""
    for key, default in defaults.items():
        if getattr(args, key, None) is not None:
            continue
        if key in config:
            value = config[key]
            if isinstance(default, bool):
                value = value.lower() in ("1", "true", "yes")
            elif default is not None:
                value = type(default)(value)
            setattr(args, key, value)
        else:
            setattr(args, key, default)


def _require(args: argparse.Namespace, *keys: str) -> None:
    for key in keys:
        if getattr(args, key) is None:
            raise UsageError(f"--{key.replace('_', '-')} is required")


def build_parser() -> _Parser:
    parser = _Parser(prog="ecglite", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key=value file; flags override it")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("preprocess", help="parse record triplets, clean to 128 Hz")
    p.add_argument("--data-dir", dest="data_dir",
                   help=f"directory of .hea/.dat/.atr triplets (default ${DATA_DIR_ENV})")
    p.add_argument("--records", help="comma-separated record names (default: all found)")
    p.add_argument("--out", help="output directory")

    p = sub.add_parser("segment", help="cut cleaned records into a labeled dataset")
    p.add_argument("--in", dest="in_dir", help="directory of cleaned records")
    p.add_argument("--out", help="dataset output directory")
    p.add_argument("--lead", type=int, help="channel index (default 0)")
    p.add_argument("--stride", type=int, help="window stride in samples (default 128)")
    p.add_argument("--cap", type=int, help="per-class segment cap (default 10000)")
    p.add_argument("--train-fraction", dest="train_fraction", type=float,
                   help="train share (default 0.85)")
    p.add_argument("--seed", type=int, help="rng seed (default 0)")

    p = sub.add_parser("train", help="train the classifier on a dataset")
    p.add_argument("--dataset", help="dataset directory")
    p.add_argument("--out", help="output directory (model.ecgm, history.csv)")
    p.add_argument("--epochs", type=int, help="training epochs (default 100)")
    p.add_argument("--batch-size", dest="batch_size", type=int, help="default 128")
    p.add_argument("--learning-rate", dest="learning_rate", type=float, help="default 1e-3")
    p.add_argument("--seed", type=int, help="rng seed (default 0)")

    p = sub.add_parser("evaluate", help="evaluate a model on a dataset's test split")
    p.add_argument("--model", help="model file")
    p.add_argument("--dataset", help="dataset directory")
    p.add_argument("--out", help="report output directory")

    p = sub.add_parser("infer", help="write per-segment class probabilities")
    p.add_argument("--model", help="model file")
    p.add_argument("--dataset", help="dataset directory")
    p.add_argument("--out", help="output directory (predictions.csv)")

    p = sub.add_parser("bench", help="single-segment inference latency benchmark")
    p.add_argument("--model", help="model file")
    p.add_argument("--iterations", type=int, help="timed runs (default 100)")
    p.add_argument("--warmup", type=int, help="untimed warmup runs (default 10)")
    return parser


def cmd_preprocess(args, config) -> int:
    _resolve(args, config, {"data_dir": os.environ.get(DATA_DIR_ENV),
                            "records": None, "out": None})
    _require(args, "data_dir", "out")
    data_dir = Path(args.data_dir)
    if not data_dir.is_dir():
        raise DataError(f"data directory not found: {data_dir}")

    if args.records:
        names = [r.strip() for r in args.records.split(",") if r.strip()]
    else:
        names = sorted(p.stem for p in data_dir.glob("*.hea"))
    if not names:
        raise DataError(f"no records found in {data_dir}")

    out = Path(args.out)
    n_ok = 0
    for name in names:
        try:
            record = wfdb_io.read_record(data_dir / name)
            cleaned = dsp.clean_record(record)
            ds.save_clean_record(cleaned, out / name)
            print(wfdb_io.parse_summary(cleaned))
            usable = sum(1 for iv in cleaned.rhythms if iv.label is not None)
            if usable == 0:
                print(f"  note: {name} has no usable rhythm intervals")
            n_ok += 1
        except (wfdb_io.WfdbError, OSError, ValueError) as exc:
            print(f"record {name}: FAILED ({exc})", file=sys.stderr)
    print(f"preprocessed {n_ok}/{len(names)} record(s) -> {out}")
    if n_ok == 0:
        raise DataError("all records failed to preprocess")
    return EXIT_OK


def cmd_segment(args, config) -> int:
    _resolve(args, config, {"in_dir": None, "out": None, "lead": 0,
                            "stride": ds.DEFAULT_STRIDE, "cap": ds.DEFAULT_CAP,
                            "train_fraction": ds.DEFAULT_TRAIN_FRACTION, "seed": 0})
    _require(args, "in_dir", "out")
    root = Path(args.in_dir)
    record_dirs = sorted(p.parent for p in root.glob(f"*/{ds.MANIFEST_NAME}"))
    if not record_dirs:
        raise DataError(f"no cleaned records under {root}")
    records = [ds.load_clean_record(d) for d in record_dirs]

    try:
        built = ds.build_dataset(records, lead=args.lead, stride=args.stride,
                                 cap=args.cap, train_fraction=args.train_fraction,
                                 seed=args.seed)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    ds.save_dataset(built, args.out)

    counts = built.class_counts
    weights = built.weights
    print(f"dataset: {len(built)} segments from {len(records)} record(s) -> {args.out}")
    print(f"{'class':<6} {'count':>7} {'weight':>9} {'train':>7} {'test':>6}")
    for cls in wfdb_io.RhythmClass:
        mask = built.labels == int(cls)
        n_train = int((mask & built.train_mask).sum())
        print(f"{cls.name:<6} {int(counts[cls]):>7} {weights[cls]:>9.4f} "
              f"{n_train:>7} {int(mask.sum()) - n_train:>6}")
    return EXIT_OK


def cmd_train(args, config) -> int:
    _resolve(args, config, {"dataset": None, "out": None, "epochs": 100,
                            "batch_size": 128, "learning_rate": 1e-3, "seed": 0})
    _require(args, "dataset", "out")
    try:
        data = ds.load_dataset(args.dataset)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot load dataset: {exc}") from exc
    x_train, y_train = data.train_arrays()
    if x_train.shape[0] == 0:
        raise DataError("dataset has an empty train split")

    model = build_model(seed=args.seed)
    cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                      learning_rate=args.learning_rate, seed=args.seed,
                      class_weights=data.weights)
    history = train(model, x_train, y_train, cfg, verbose=True)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model_path = out / "model.ecgm"
    n_bytes = model_store.save(model, model_path)
    lines = ["epoch,loss,weighted_accuracy"]
    lines += [f"{i},{h.loss:.6f},{h.weighted_accuracy:.4f}"
              for i, h in enumerate(history, start=1)]
    (out / "history.csv").write_text("\n".join(lines) + "\n")
    print(f"saved {model_path} ({n_bytes} bytes) and history.csv")
    return EXIT_OK


def _load_model_and_dataset(args):
    try:
        model = model_store.load(args.model)
    except (OSError, model_store.StoreError) as exc:
        raise DataError(f"cannot load model: {exc}") from exc
    try:
        data = ds.load_dataset(args.dataset)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot load dataset: {exc}") from exc
    return model, data


def cmd_evaluate(args, config) -> int:
    _resolve(args, config, {"model": None, "dataset": None, "out": None})
    _require(args, "model", "dataset", "out")
    model, data = _load_model_and_dataset(args)
    x_test, y_test = data.test_arrays()
    if x_test.shape[0] == 0:
        raise DataError("dataset has an empty test split")

    probs = model.predict(x_test)
    report = evaluation.evaluate(probs, y_test,
                                 model_bytes=Path(args.model).stat().st_size)
    files = evaluation.emit_report(report, args.out)

    def show(v):
        return "NA" if v is None else f"{v:.2f}%"

    print(f"evaluated {x_test.shape[0]} test segments")
    print(f"overall accuracy {show(report.overall_accuracy)}  "
          f"macro per-class accuracy {show(report.macro.accuracy)}")
    print(f"macro sensitivity {show(report.macro.sensitivity)}  "
          f"macro specificity {show(report.macro.specificity)}")
    print(f"wrote {len(files)} report file(s) to {args.out}")
    return EXIT_OK


def cmd_infer(args, config) -> int:
    _resolve(args, config, {"model": None, "dataset": None, "out": None})
    _require(args, "model", "dataset", "out")
    model, data = _load_model_and_dataset(args)
    probs = model.predict(data.samples)
    predicted = probs.argmax(axis=1)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    prob_cols = ",".join(f"prob_{n}" for n in wfdb_io.CLASS_NAMES)
    lines = [f"index,record,onset,predicted,{prob_cols}"]
    for i in range(probs.shape[0]):
        name, onset = data.sources[i] if i < len(data.sources) else ("", 0)
        row = ",".join(f"{p:.4f}" for p in probs[i])
        lines.append(f"{i},{name},{onset},{wfdb_io.CLASS_NAMES[predicted[i]]},{row}")
    path = out / "predictions.csv"
    path.write_text("\n".join(lines) + "\n")
    print(f"wrote {probs.shape[0]} predictions to {path}")
    return EXIT_OK


def cmd_bench(args, config) -> int:
    _resolve(args, config, {"model": None, "iterations": 100, "warmup": 10})
    _require(args, "model")
    if args.iterations < 1:
        raise UsageError("--iterations must be >= 1")
    try:
        model = model_store.load(args.model)
    except (OSError, model_store.StoreError) as exc:
        raise DataError(f"cannot load model: {exc}") from exc

    stats = evaluation.measure_latency(model, n_iterations=args.iterations,
                                       warmup=args.warmup)
    size = Path(args.model).stat().st_size
    print(f"single-segment inference over {stats.n_iterations} runs "
          f"(after {args.warmup} warmup):")
    print(f"  mean {stats.mean_ms:.3f} ms   p50 {stats.p50_ms:.3f} ms   "
          f"p95 {stats.p95_ms:.3f} ms")
    print(f"  model file {size} bytes ({size / 1e6:.3f} MB)")
    print(f"  reference (Raspberry Pi holter target, informational): "
          f"{REFERENCE_LATENCY_MS} ms, {REFERENCE_MODEL_MB} MB")
    return EXIT_OK


COMMANDS = {
    "preprocess": cmd_preprocess,
    "segment": cmd_segment,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "infer": cmd_infer,
    "bench": cmd_bench,
}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a command is required (see --help)")
        config = _read_config(args.config)
        return COMMANDS[args.command](args, config)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingDiverged as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
