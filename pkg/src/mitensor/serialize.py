"""On-disk formats: feature CSV and the versioned JSON model file."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import FileNotReadable, VersionMismatch
from .features import FEATURE_NAMES, FeatureVector, Standardizer
from .inertia import InertiaTensor
from .ingest import ClassLabel
from .svm import BinarySvmModel, KernelSpec, MultiClassModel, TrainConfig

FEATURE_CSV_HEADER = ("path", "label", "lambda1", "lambda2", "delta", "mass", "i00", "i01", "i11")
MODEL_FORMAT_VERSION = 1


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def write_feature_csv(path, vectors) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FEATURE_CSV_HEADER)
        for v in vectors:
            t = v.tensor
            tensor_cols = [fmt_float(t.i00), fmt_float(t.i01), fmt_float(t.i11)] if t else ["", "", ""]
            writer.writerow(
                [v.path or "", v.label.dirname if v.label is not None else ""]
                + [fmt_float(getattr(v, name)) for name in FEATURE_NAMES]
                + tensor_cols
            )


def read_feature_csv(path):
    """Return ``(columns, vectors)``.

    Feature columns absent from the file read as NaN; callers check
    ``columns`` against the selection they need.
    """
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise FileNotReadable(f"{path}: {exc.strerror or exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        columns = tuple(reader.fieldnames or ())
        vectors = []
        for row in reader:
            def num(name):
                text = row.get(name)
                return float(text) if text not in (None, "") else math.nan

            tensor = None
            if all(row.get(k) not in (None, "") for k in ("i00", "i01", "i11")):
                tensor = InertiaTensor(num("i00"), num("i01"), num("i11"))
            label_text = row.get("label")
            vectors.append(
                FeatureVector(
                    lambda1=num("lambda1"),
                    lambda2=num("lambda2"),
                    delta=num("delta"),
                    mass=num("mass"),
                    label=ClassLabel.parse(label_text) if label_text else None,
                    tensor=tensor,
                    path=row.get("path") or None,
                )
            )
    return columns, vectors


def _binary_to_dict(label: ClassLabel, m: BinarySvmModel) -> dict:
    return {
        "label": label.dirname,
        "degenerate": m.degenerate,
        "converged": m.converged,
        "sweeps": m.sweeps,
        "updates": m.updates,
        "kernel": {"kind": m.kernel.kind, "gamma": m.kernel.gamma},
        "c": m.c,
        "n_features": m.n_features,
        "bias": m.bias,
        "alphas": m.alphas.tolist(),
        "signs": [int(s) for s in m.signs],
        "support_vectors": m.support_vectors.tolist(),
    }


def _binary_from_dict(d: dict) -> BinarySvmModel:
    n_features = int(d["n_features"])
    svs = np.array(d["support_vectors"], dtype=np.float64).reshape(-1, n_features)
    return BinarySvmModel(
        support_vectors=svs,
        alphas=np.array(d["alphas"], dtype=np.float64),
        signs=np.array(d["signs"], dtype=np.float64),
        bias=float(d["bias"]),
        kernel=KernelSpec(d["kernel"]["kind"], d["kernel"]["gamma"]),
        c=float(d["c"]),
        n_features=n_features,
        converged=bool(d["converged"]),
        sweeps=int(d["sweeps"]),
        updates=int(d["updates"]),
        degenerate=bool(d["degenerate"]),
    )


def model_to_dict(model: MultiClassModel) -> dict:
    cfg = model.config
    return {
        "format_version": model.format_version,
        "selection": list(model.selection),
        "standardizer": {
            "mean": model.standardizer.mean.tolist(),
            "std": model.standardizer.std.tolist(),
        },
        "config": {
            "c": cfg.c,
            "kernel": cfg.kernel,
            "gamma": cfg.gamma,
            "tol": cfg.tol,
            "max_passes": cfg.max_passes,
            "max_iter": cfg.max_iter,
            "seed": cfg.seed,
        },
        "classes": [_binary_to_dict(label, m) for label, m in zip(ClassLabel, model.models)],
    }


def model_from_dict(d: dict) -> MultiClassModel:
    version = d.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise VersionMismatch(f"model format version {version!r}; this build reads {MODEL_FORMAT_VERSION}")
    selection = tuple(d["selection"])
    standardizer = Standardizer(
        selection,
        np.array(d["standardizer"]["mean"], dtype=np.float64),
        np.array(d["standardizer"]["std"], dtype=np.float64),
    )
    config = TrainConfig(selection=selection, **d["config"])
    models = [_binary_from_dict(c) for c in d["classes"]]
    if len(models) != len(ClassLabel):
        raise ValueError(f"model file holds {len(models)} class models, expected {len(ClassLabel)}")
    return MultiClassModel(standardizer, models, config, format_version=version)


def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def save_model(model: MultiClassModel, path) -> None:
    dump_json(model_to_dict(model), path)


def load_model(path) -> MultiClassModel:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FileNotReadable(f"{path}: {exc.strerror or exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not a model file ({exc})") from exc
    return model_from_dict(data)
