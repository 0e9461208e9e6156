"""Command line front end.

Subcommands: ``extract``, ``train``, ``evaluate``, ``predict``, ``report``.
Exit codes: 0 success, 1 fatal error, 2 partial success (some items skipped).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .errors import (
    EmptyDataset,
    EmptyTestSet,
    FeatureSelectionMismatch,
    InsufficientData,
    MissingClass,
    MitensorError,
)
from .evaluation import SplitConfig, class_statistics, evaluate, stratified_split, trend_check
from .features import FEATURE_NAMES, extract_features, parse_selection
from .ingest import ClassLabel, load_dataset, load_image
from .serialize import (
    dump_json,
    fmt_float,
    load_model,
    read_feature_csv,
    save_model,
    write_feature_csv,
)
from .svm import TrainConfig, argmax_label, class_scores, train_multiclass

logger = logging.getLogger("mitensor")

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2

DEFAULTS = {
    "seed": 0,
    "test_fraction": 0.2,
    "c": 1.0,
    "kernel": "rbf",
    "gamma": None,
    "features": "lambda1,lambda2",
    "tol": 1e-3,
    "max_passes": 10,
    "max_iter": 1_000_000,
    "workers": min(4, os.cpu_count() or 1),
}


def _setting(args, config: dict, name: str):
    """Flag value if given, then config file, then the built-in default."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    if name in config:
        return config[name]
    return DEFAULTS[name]


def _load_config(path) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        data = json.load(fh)
    unknown = set(data) - set(DEFAULTS)
    if unknown:
        raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")
    return data


def _train_config(args, config) -> TrainConfig:
    return TrainConfig(
        c=float(_setting(args, config, "c")),
        kernel=_setting(args, config, "kernel"),
        gamma=_setting(args, config, "gamma"),
        tol=float(_setting(args, config, "tol")),
        max_passes=int(_setting(args, config, "max_passes")),
        max_iter=int(_setting(args, config, "max_iter")),
        seed=int(_setting(args, config, "seed")),
        selection=parse_selection(_setting(args, config, "features")),
    )


def _display_path(path: Path, root: Path) -> str:
    try:
        return path.relative_to(root).as_posix()
    except ValueError:
        return path.as_posix()


def extract_manifest(manifest, workers: int = 1):
    """Extract features for every manifest entry.

    Returns ``(vectors, failures)`` where failures is a list of
    ``(path, message)``. Output order follows the manifest.
    """

    def work(entry):
        try:
            fv = extract_features(load_image(entry.path))
        except MitensorError as exc:
            return None, str(exc)
        fv.label = entry.label
        fv.path = _display_path(entry.path, manifest.root)
        return fv, None

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(work, manifest.entries))
    vectors, failures = [], []
    for entry, (fv, err) in zip(manifest.entries, results):
        if fv is None:
            logger.warning("skipping %s", err)
            failures.append((_display_path(entry.path, manifest.root), err))
        else:
            vectors.append(fv)
    return vectors, failures


def _write_errors_log(directory: Path, failures) -> Path:
    log_path = directory / "errors.log"
    with open(log_path, "w") as fh:
        for path, message in failures:
            fh.write(f"{path}\t{message}\n")
    return log_path


def _require_columns(columns, selection, need_label=False):
    missing = [name for name in selection if name not in columns]
    if missing:
        raise FeatureSelectionMismatch(f"feature CSV lacks column(s) {', '.join(missing)} required by selection {','.join(selection)}")
    if need_label and "label" not in columns:
        raise FeatureSelectionMismatch("feature CSV has no label column")


def cmd_extract(args, config) -> int:
    manifest = load_dataset(args.dataset)
    workers = int(_setting(args, config, "workers"))
    vectors, failures = extract_manifest(manifest, workers)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_feature_csv(out, vectors)
    print(f"wrote {len(vectors)} feature rows to {out}")
    if failures:
        log_path = _write_errors_log(out.parent, failures)
        print(f"{len(failures)} image(s) skipped; see {log_path}", file=sys.stderr)
        return EXIT_FATAL if not vectors else EXIT_PARTIAL
    return EXIT_OK


def _labeled_features(source, selection, workers):
    source = Path(source)
    if source.is_dir():
        vectors, failures = extract_manifest(load_dataset(source), workers)
        return vectors, failures
    columns, vectors = read_feature_csv(source)
    _require_columns(columns, selection, need_label=True)
    unlabeled = [v.path or "?" for v in vectors if v.label is None]
    if unlabeled:
        raise InsufficientData(f"{len(unlabeled)} training row(s) have no label, e.g. {unlabeled[0]}")
    return vectors, []


def _training_report(model, n_train, n_test, metrics, failures) -> dict:
    return {
        "n_train": n_train,
        "n_test": n_test,
        "selection": list(model.selection),
        "kernel": {"kind": model.kernel.kind, "gamma": model.kernel.gamma},
        "classes": [
            {
                "label": label.dirname,
                "support_vectors": m.n_support,
                "converged": m.converged,
                "degenerate": m.degenerate,
                "sweeps": m.sweeps,
                "updates": m.updates,
            }
            for label, m in zip(ClassLabel, model.models)
        ],
        "holdout": metrics.to_dict() if metrics is not None else None,
        "skipped_images": len(failures),
    }


def cmd_train(args, config) -> int:
    train_cfg = _train_config(args, config)
    split_cfg = SplitConfig(
        test_fraction=float(_setting(args, config, "test_fraction")),
        seed=int(_setting(args, config, "seed")),
        stratified=not args.no_stratify,
    )
    vectors, failures = _labeled_features(args.input, train_cfg.selection, int(_setting(args, config, "workers")))
    if not vectors:
        raise InsufficientData("no training data")
    if len({v.label for v in vectors}) < 2:
        raise InsufficientData("training data must contain at least 2 classes")

    train, test = stratified_split(vectors, split_cfg)
    model = train_multiclass(train, train_cfg)
    metrics = evaluate(model, test) if test else None

    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, out)
    report_path = Path(args.report) if args.report else out.with_suffix(".report.json")
    report = _training_report(model, len(train), len(test), metrics, failures)
    dump_json(report, report_path)
    if args.test_output:
        write_feature_csv(args.test_output, test)
    if failures:
        _write_errors_log(out.parent, failures)

    print(f"trained on {len(train)} samples, held out {len(test)}")
    for entry in report["classes"]:
        state = "degenerate" if entry["degenerate"] else ("converged" if entry["converged"] else "NOT converged")
        print(f"  {entry['label']:<18} support vectors {entry['support_vectors']:>5}  {state}")
    if metrics is not None:
        print(f"holdout accuracy {metrics.accuracy:.4f}")
    print(f"model written to {out}, report to {report_path}")
    return EXIT_PARTIAL if failures else EXIT_OK


def _stats_to_dict(stats) -> dict:
    return {
        label.dirname: {
            "count": s.count,
            "mean_asymmetry": s.mean_asymmetry,
            "mean_mass": s.mean_mass,
            "mean_lambda1": s.mean_lambda1,
            "mean_lambda2": s.mean_lambda2,
        }
        for label, s in stats.items()
    }


def _format_metrics(metrics) -> str:
    names = [label.dirname for label in ClassLabel]
    width = max(len(n) for n in names)
    lines = [f"accuracy {metrics.accuracy:.4f} ({int(metrics.confusion.trace())}/{metrics.total})", ""]
    lines.append(" " * (width + 2) + " ".join(f"{n[:8]:>8}" for n in names))
    for name, row in zip(names, metrics.confusion):
        lines.append(f"{name:<{width}}  " + " ".join(f"{int(v):>8d}" for v in row))
    lines.append("")
    for k, name in enumerate(names):
        p = "n/a" if metrics.precision_undefined[k] else f"{metrics.precision[k]:.4f}"
        r = "n/a" if metrics.recall_undefined[k] else f"{metrics.recall[k]:.4f}"
        lines.append(f"{name:<{width}}  precision {p:>6}  recall {r:>6}")
    return "\n".join(lines)


def cmd_evaluate(args, config) -> int:
    model = load_model(args.model)
    columns, vectors = read_feature_csv(args.features)
    _require_columns(columns, model.selection, need_label=True)
    if not vectors:
        raise EmptyTestSet(f"{args.features}: no rows")
    if any(v.label is None for v in vectors):
        raise FeatureSelectionMismatch("every evaluation row needs a label")
    metrics = evaluate(model, vectors)
    stats = class_statistics(vectors)
    try:
        trend = trend_check(stats).to_dict()
    except MissingClass as exc:
        trend = {"error": f"MissingClass: {exc}"}
    report = metrics.to_dict()
    report["class_statistics"] = _stats_to_dict(stats)
    report["trend_check"] = trend
    print(_format_metrics(metrics))
    if args.output:
        dump_json(report, args.output)
        print(f"metrics written to {args.output}")
    return EXIT_OK


def cmd_predict(args, config) -> int:
    model = load_model(args.model)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["path", "predicted_label", "score_0", "score_1", "score_2", "score_3"])
    failed = 0
    for path in args.images:
        try:
            fv = extract_features(load_image(path))
        except MitensorError as exc:
            failed += 1
            print(f"error: {exc}", file=sys.stderr)
            continue
        scores = class_scores(model, [fv])[0]
        writer.writerow([path, argmax_label(scores).dirname] + [fmt_float(s) for s in scores])
    if failed:
        return EXIT_FATAL if failed == len(args.images) else EXIT_PARTIAL
    return EXIT_OK


def cmd_report(args, config) -> int:
    columns, vectors = read_feature_csv(args.features)
    if not vectors:
        raise EmptyDataset(f"{args.features}: no feature rows")
    _require_columns(columns, FEATURE_NAMES, need_label=True)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)

    with open(out / "scatter.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "lambda1", "lambda2"])
        for v in vectors:
            w.writerow([v.label.dirname if v.label is not None else "", fmt_float(v.lambda1), fmt_float(v.lambda2)])

    labeled = [v for v in vectors if v.label is not None]
    stats = class_statistics(labeled)
    with open(out / "class_averages.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "count", "mean_asymmetry", "mean_mass", "mean_lambda1", "mean_lambda2"])
        for label, s in stats.items():
            w.writerow([label.dirname, s.count] + [fmt_float(v) for v in
                       (s.mean_asymmetry, s.mean_mass, s.mean_lambda1, s.mean_lambda2)])

    try:
        text = trend_check(stats).format()
    except MissingClass as exc:
        text = f"MissingClass: {exc}\n"
    (out / "trend.txt").write_text(text)
    print(f"wrote scatter.csv, class_averages.csv and trend.txt to {out}")
    return EXIT_OK


def _add_training_flags(p):
    d = DEFAULTS
    p.add_argument("--seed", type=int, help=f"seed for splitting and SMO (default: {d['seed']})")
    p.add_argument("--test-fraction", type=float, help=f"held-out fraction (default: {d['test_fraction']})")
    p.add_argument("--c", type=float, help=f"SVM box constraint (default: {d['c']})")
    p.add_argument("--kernel", choices=("linear", "rbf"), help=f"kernel (default: {d['kernel']})")
    p.add_argument("--gamma", type=float,
                   help="rbf width (default: 1/(n_features * variance) of the standardized training data)")
    p.add_argument("--features", help=f"comma-separated subset of {','.join(FEATURE_NAMES)} (default: {d['features']})")
    p.add_argument("--tol", type=float, help=f"SMO KKT tolerance (default: {d['tol']})")
    p.add_argument("--max-passes", type=int, help=f"SMO sweeps without change before stopping (default: {d['max_passes']})")
    p.add_argument("--max-iter", type=int, help=f"cap on SMO pair updates (default: {d['max_iter']})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mitensor",
        description="Moment-of-inertia image features and kernel SVM dementia-stage classification.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    parser.add_argument("--config", help="JSON file of defaults; flags override it")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="compute features for a dataset and write a CSV")
    p.add_argument("dataset", help="dataset root with class directories, or a path,label manifest CSV")
    p.add_argument("--output", "-o", default="features.csv", help="feature CSV to write (default: features.csv)")
    p.add_argument("--workers", type=int, help=f"decoder threads (default: {DEFAULTS['workers']})")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="split, standardize and train the one-vs-rest SVM")
    p.add_argument("input", help="feature CSV or dataset root")
    p.add_argument("--output", "-o", default="model.json", help="model file to write (default: model.json)")
    p.add_argument("--report", help="training report JSON (default: <model>.report.json)")
    p.add_argument("--test-output", help="also write the held-out rows as a feature CSV")
    p.add_argument("--no-stratify", action="store_true", help="plain random holdout instead of per-class")
    p.add_argument("--workers", type=int, help=f"decoder threads when input is a dataset (default: {DEFAULTS['workers']})")
    _add_training_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a model on a labeled feature CSV")
    p.add_argument("model")
    p.add_argument("features")
    p.add_argument("--output", "-o", help="metrics JSON to write")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="classify image files")
    p.add_argument("model")
    p.add_argument("images", nargs="+")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("report", help="write scatter, class-average and trend data")
    p.add_argument("features")
    p.add_argument("--output", "-o", default="report", help="output directory (default: report)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = _load_config(args.config)
        return args.func(args, config)
    except MitensorError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FATAL
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
