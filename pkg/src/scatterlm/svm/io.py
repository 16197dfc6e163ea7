"""Text formats for training sets and trained models.

Training set: ``#`` header lines ``# key: value`` then one row per pair,
``label v1 v2 ... v15k``. Model: a JSON document with a ``format_version`` field.
Floats are written with 17 significant digits so that files round-trip exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .kernels import KernelSpec
from .multiclass import MulticlassSvmModel, TrainingSet
from .smo import BinarySvmModel

__all__ = [
    "FORMAT_VERSION",
    "write_training_set",
    "read_training_set",
    "model_to_dict",
    "model_from_dict",
    "write_model",
    "read_model",
]

FORMAT_VERSION = 1


def _fmt(v) -> str:
    return format(float(v), ".17g")


def write_training_set(ts: TrainingSet, path) -> None:
    meta = dict(ts.meta)
    meta.setdefault("class_count", ts.class_count)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# format-version: {FORMAT_VERSION}\n")
        for key in sorted(meta):
            fh.write(f"# {key}: {json.dumps(meta[key], sort_keys=True)}\n")
        for lab, row in zip(ts.labels, ts.X):
            fh.write(str(int(lab)) + " " + " ".join(_fmt(v) for v in row) + "\n")


def read_training_set(path) -> TrainingSet:
    path = Path(path)
    meta = {}
    rows = []
    with open(path, encoding="utf-8") as fh:
        for ln in fh:
            s = ln.strip()
            if not s:
                continue
            if s.startswith("#"):
                key, sep, val = s[1:].partition(":")
                if sep:
                    try:
                        meta[key.strip()] = json.loads(val)
                    except json.JSONDecodeError:
                        meta[key.strip()] = val.strip()
                continue
            rows.append(s.split())
    version = meta.pop("format-version", None)
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported training-set format version {version!r}")
    if not rows:
        raise ValueError(f"{path}: no training pairs")
    if len({len(r) for r in rows}) != 1:
        raise ValueError(f"{path}: rows have differing lengths")
    try:
        labels = np.array([int(r[0]) for r in rows])
        X = np.array([[float(v) for v in r[1:]] for r in rows])
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    return TrainingSet(X, labels, meta.get("class_count"), meta)


def _binary_to_dict(m: BinarySvmModel) -> dict:
    return {
        "bias": float(m.bias),
        "C": float(m.C),
        "iterations": int(m.iterations),
        "converged": bool(m.converged),
        "alpha_y": [float(v) for v in m.alpha_y],
        "support_vectors": [[float(v) for v in row] for row in m.support_vectors],
    }


def model_to_dict(model: MulticlassSvmModel, meta: dict | None = None) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kernel": model.kernel.to_dict(),
        "class_labels": list(model.class_labels),
        "class_to_subrange": {str(k): list(v) for k, v in sorted(model.class_to_subrange.items())},
        "binary_models": [
            {"classes": [a, b], **_binary_to_dict(m)}
            for (a, b), m in sorted(model.binary_models.items())
        ],
        "meta": meta or {},
    }


def model_from_dict(d: dict) -> MulticlassSvmModel:
    if d.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {d.get('format_version')!r}")
    kernel = KernelSpec.from_dict(d["kernel"])
    models = {}
    for bm in d["binary_models"]:
        a, b = bm["classes"]
        n_feat = None
        sv = np.array(bm["support_vectors"], dtype=float)
        if sv.size == 0:
            n_feat = int(d.get("meta", {}).get("n_features", 0))
            sv = np.zeros((0, n_feat))
        models[(int(a), int(b))] = BinarySvmModel(sv, np.array(bm["alpha_y"], dtype=float), bm["bias"],
                                                  kernel, bm["C"], bm["iterations"], bm["converged"])
    c2s = {int(k): tuple(v) for k, v in d.get("class_to_subrange", {}).items()}
    return MulticlassSvmModel(models, tuple(d["class_labels"]), c2s)


def write_model(model: MulticlassSvmModel, path, meta: dict | None = None) -> None:
    meta = dict(meta or {})
    meta.setdefault("n_features", model.n_features)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(model_to_dict(model, meta), fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_model(path) -> tuple[MulticlassSvmModel, dict]:
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    return model_from_dict(d), d.get("meta", {})
