"""Command-line front end.

Subcommands: train, predict, evaluate, experiment, bench-fps, featurize,
nn-cost. Exit codes: 0 success, 1 usage error, 2 data error, 3 internal
error. The experiment report path writes the structured document, the flat
table, and rendered figures side by side.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .bench import (
    ExperimentConfig,
    NnCostParams,
    SyntheticSpec,
    emit_report,
    experiment_config_from_dict,
    measure_fps,
    nn_flops,
    nn_inference_cost,
    nn_training_cost,
    run_experiment,
)
from .cascade import (
    CascadeConfig,
    cascade_config_from_dict,
    fit_cascade,
    load_model,
    predict_batch,
    save_model,
)
from .data import Dataset, load_csv, make_blobs, save_csv
from .errors import DataError, MissingLabelColumn, NonNumericFeature, OutputUnwritable
from .featurize import featurize_directory
from .metrics import confusion, evaluate_predictions


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route argparse failures to exit code 1
        raise UsageError(message)


# ------------------------------------------------------------ input helpers
def _load_unlabeled(path) -> np.ndarray:
    """Feature matrix from a CSV that has no label column."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        names = [h.strip() for h in header]
        rows = []
        for r, row in enumerate(reader):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(names):
                raise DataError(f"{path}: row {r} has {len(row)} cells, expected {len(names)}")
            vals = []
            for name, cell in zip(names, row):
                try:
                    v = float(cell)
                except ValueError:
                    raise NonNumericFeature(r, name, cell.strip()) from None
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.asarray(rows, dtype=np.float64)


def _load_features(path, label_column: str):
    """(features, labels-or-None, dataset-or-None) from a CSV path."""
    try:
        data = load_csv(path, label_column=label_column)
        return data.features, data.labels, data
    except MissingLabelColumn:
        return _load_unlabeled(path), None, None


def _dataset_from_args(args) -> Dataset:
    picked = [bool(args.data), bool(args.images), bool(args.synthetic)]
    if sum(picked) != 1:
        raise UsageError("give exactly one of --data, --images, --synthetic")
    if args.data:
        return load_csv(args.data, label_column=args.label_column)
    if args.images:
        problems: list = []
        data = featurize_directory(args.images, problems=problems)
        for path, reason in problems:
            print(f"warning: skipped {path}: {reason}", file=sys.stderr)
        return data
    return make_blobs(**_parse_synthetic(args.synthetic))


def _parse_synthetic(spec: str) -> dict:
    """Parse 'classes=3,per_class=20,d=4,spread=1.0,seed=0' style specs."""
    out = {"n_classes": 3, "n_per_class": 50, "d": 10, "spread": 1.0, "seed": 0}
    rename = {"classes": "n_classes", "per_class": "n_per_class"}
    for part in spec.split(","):
        if not part.strip():
            continue
        if "=" not in part:
            raise UsageError(f"bad synthetic spec fragment {part!r}")
        key, _, value = part.partition("=")
        key = rename.get(key.strip(), key.strip())
        if key not in out:
            raise UsageError(f"unknown synthetic spec key {key!r}")
        try:
            out[key] = float(value) if key == "spread" else int(value)
        except ValueError:
            raise UsageError(f"bad value for synthetic key {key!r}") from None
    return out


def _cascade_config(args) -> CascadeConfig:
    if args.config:
        raw = _read_json(args.config)
        cfg = cascade_config_from_dict(raw, path=str(args.config))
    else:
        cfg = CascadeConfig()
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def _read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: invalid JSON: {e}") from None


def _write_or_print(text: str, out: str | None) -> None:
    if out is None:
        print(text, end="" if text.endswith("\n") else "\n")
        return
    try:
        Path(out).write_text(text, encoding="utf-8")
    except OSError as e:
        raise OutputUnwritable(str(out), str(e)) from None


# -------------------------------------------------------------- subcommands
def cmd_train(args) -> int:
    data = _dataset_from_args(args)
    cfg = _cascade_config(args)
    model = fit_cascade(data, cfg, n_workers=args.workers)
    save_model(model, args.out)
    best = model.layers[-1].validation_metric
    print(
        f"trained {len(model.layers)} layer(s) on {data.n_samples} rows; "
        f"validation {cfg.growth_metric}={best:.4f}; model -> {args.out}"
    )
    return 0


def cmd_predict(args) -> int:
    model = load_model(args.model)
    features, _, _ = _load_features(args.data, args.label_column)
    preds = predict_batch(model, features)
    names = model.class_names
    lines = ["prediction"]
    for p in preds:
        lines.append(names[p] if names else str(int(p)))
    _write_or_print("\n".join(lines) + "\n", args.out)
    return 0


def cmd_evaluate(args) -> int:
    model = load_model(args.model)
    data = load_csv(args.data, label_column=args.label_column)
    preds = predict_batch(model, data.features)
    n_classes = max(model.n_classes, data.n_classes)
    report = evaluate_predictions(data.labels, preds, n_classes)
    cells = confusion(data.labels, preds, n_classes)
    doc = {
        "n_samples": data.n_samples,
        "metrics": report.scalars(),
        "confusion": cells.counts.tolist(),
    }
    _write_or_print(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
    return 0


def cmd_experiment(args) -> int:
    if args.config:
        cfg = experiment_config_from_dict(_read_json(args.config), path=str(args.config))
    else:
        cfg = ExperimentConfig()
    updates: dict = {}
    if args.fractions:
        try:
            updates["fractions"] = tuple(float(f) for f in args.fractions.split(","))
        except ValueError:
            raise UsageError(f"bad --fractions value {args.fractions!r}") from None
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out:
        updates["output"] = args.out
    if updates:
        try:
            cfg = dataclasses.replace(cfg, **updates)
        except ValueError as e:
            raise UsageError(str(e)) from None
    report = run_experiment(cfg, n_workers=args.workers)
    if cfg.output is not None:
        json_path, csv_path = emit_report(report, cfg.output)
        print(f"report -> {json_path} and {csv_path}")
        if not args.no_figures:
            from .figures import render_report_figures

            for fig_path in render_report_figures(report, cfg.output):
                print(f"figure -> {fig_path}")
    header = f"{'chunk':>6} {'size':>6} {'f1_w':>8} {'acc':>8} {'mcc':>8} {'secs':>8} {'fps':>9}"
    print(header)
    for s in report.summaries:
        m = s.medians
        print(
            f"{s.chunk:>6.2f} {s.size:>6d} {m['f1_weighted']:>8.4f} "
            f"{m['accuracy']:>8.4f} {m['mcc']:>8.4f} "
            f"{m['train_seconds']:>8.2f} {m['fps']:>9.1f}"
        )
    return 0


def cmd_bench_fps(args) -> int:
    model = load_model(args.model)
    features, labels, data = _load_features(args.data, args.label_column)
    if data is None:
        # probe labels are irrelevant to throughput; wrap bare features
        data = Dataset(
            features=features,
            labels=np.zeros(features.shape[0], dtype=np.int64),
            class_names=["p0", "p1"],
            feature_names=[f"f{i}" for i in range(features.shape[1])],
        )
    fps = measure_fps(model, data, repeats=args.repeats)
    print(f"{fps:.2f}")
    return 0


def cmd_featurize(args) -> int:
    problems: list = []
    data = featurize_directory(args.images, problems=problems)
    for path, reason in problems:
        print(f"warning: skipped {path}: {reason}", file=sys.stderr)
    save_csv(data, args.out, label_column=args.label_column)
    print(
        f"featurized {data.n_samples} image(s), {data.n_classes} class(es) -> {args.out}"
    )
    return 0


def cmd_nn_cost(args) -> int:
    out: dict = {}
    if args.widths:
        try:
            widths = tuple(int(w) for w in args.widths.split(","))
        except ValueError:
            raise UsageError(f"bad --widths value {args.widths!r}") from None
        params = NnCostParams(widths=widths, E=args.epochs or 1)
        forward, total = nn_flops(params.widths, params.E)
        out["forward_ops"] = forward
        out["total_ops"] = total
    elif args.layers and args.neurons:
        params = NnCostParams(
            L=args.layers,
            N=args.neurons,
            e=args.epochs,
            D=args.dataset_size,
            B=args.batch_size,
        )
        out["inference_ops"] = nn_inference_cost(params.L, params.N)
        if args.epochs and args.dataset_size and args.batch_size:
            out["training_ops"] = nn_training_cost(
                params.e, params.D, params.B, params.L, params.N
            )
    else:
        raise UsageError("give --widths, or --layers with --neurons")
    print(json.dumps(out, sort_keys=True))
    return 0


# ------------------------------------------------------------------ parser
def build_parser() -> _Parser:
    parser = _Parser(prog="treenet", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_data_flags(p, with_sources=False):
        if with_sources:
            p.add_argument("--data", help="labeled CSV file")
            p.add_argument("--images", help="directory of class-labeled images")
            p.add_argument(
                "--synthetic",
                help="blob spec, e.g. classes=3,per_class=50,d=10,spread=1.0,seed=0",
            )
        else:
            p.add_argument("--data", required=True, help="CSV file")
        p.add_argument("--label-column", default="label", help="label column name")

    p = sub.add_parser("train", help="fit a model and write the model file")
    add_data_flags(p, with_sources=True)
    p.add_argument("--config", help="training configuration file (JSON)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="model file path")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="label new rows with a trained model")
    p.add_argument("--model", required=True)
    add_data_flags(p)
    p.add_argument("--out", help="write predictions here instead of stdout")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score a model against labeled rows")
    p.add_argument("--model", required=True)
    add_data_flags(p)
    p.add_argument("--out", help="write the metrics document here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="run a data-fraction sweep")
    p.add_argument("--config", help="experiment configuration file (JSON)")
    p.add_argument("--fractions", help="comma-separated fractions, e.g. 0.1,0.5,1.0")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", help="report base path; writes .json, .csv, figures")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("bench-fps", help="measure single-sample throughput")
    p.add_argument("--model", required=True)
    add_data_flags(p)
    p.add_argument("--repeats", type=int, default=3)
    p.set_defaults(func=cmd_bench_fps)

    p = sub.add_parser("featurize", help="turn an image directory into a CSV")
    p.add_argument("--images", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--label-column", default="label")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("nn-cost", help="closed-form network cost estimates")
    p.add_argument("--layers", type=int)
    p.add_argument("--neurons", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--dataset-size", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--widths", help="comma-separated per-layer widths, e.g. 3,4,2")
    p.set_defaults(func=cmd_nn_cost)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except SystemExit as e:  # argparse --help
        code = e.code
        return int(code) if isinstance(code, int) else 0
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as e:
        # unreadable user files and out-of-range values are data problems
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001  (boundary: anything else is internal)
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
