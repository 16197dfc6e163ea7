"""One-vs-one multiclass SVM with majority voting."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .kernels import KernelSpec, gram
from .smo import BinarySvmModel, SmoConvergenceError, smo_train

__all__ = [
    "TrainingSet",
    "MulticlassSvmModel",
    "ovo_train",
    "ovo_classify",
    "classification_accuracy",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainingSet:
    """Feature matrix X (n, d) with integer class labels (n,) and free-form metadata."""

    X: np.ndarray
    labels: np.ndarray
    class_count: int | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        lab = np.asarray(self.labels).ravel().astype(int)
        if X.shape[0] != lab.size:
            raise ValueError("feature/label count mismatch")
        if not np.all(np.isfinite(X)):
            raise ValueError("training features must be finite")
        n_cls = self.class_count if self.class_count is not None else (int(lab.max()) + 1 if lab.size else 0)
        if n_cls < 2:
            raise ValueError("a training set needs at least 2 classes")
        present = set(np.unique(lab).tolist())
        missing = [c for c in range(n_cls) if c not in present]
        if missing:
            raise ValueError(f"classes {missing} have no training pairs")
        if lab.min() < 0 or lab.max() >= n_cls:
            raise ValueError(f"labels must lie in 0..{n_cls - 1}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "class_count", int(n_cls))

    def __len__(self):
        return self.labels.size

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def __eq__(self, other):
        if not isinstance(other, TrainingSet):
            return NotImplemented
        return (self.class_count == other.class_count and np.array_equal(self.X, other.X)
                and np.array_equal(self.labels, other.labels))

    __hash__ = None


@dataclass(frozen=True)
class MulticlassSvmModel:
    """Pairwise machines keyed by (a, b) with a < b; +1 votes for a, -1 for b."""

    binary_models: dict
    class_labels: tuple
    class_to_subrange: dict = field(default_factory=dict)

    def __post_init__(self):
        labels = tuple(int(c) for c in self.class_labels)
        n = len(labels)
        expected = set(itertools.combinations(labels, 2))
        if set(self.binary_models) != expected:
            raise ValueError(f"expected {n * (n - 1) // 2} pairwise models for {n} classes")
        object.__setattr__(self, "class_labels", labels)
        object.__setattr__(self, "class_to_subrange",
                           {int(k): (float(v[0]), float(v[1])) for k, v in self.class_to_subrange.items()})

    @property
    def n_classes(self) -> int:
        return len(self.class_labels)

    @property
    def kernel(self) -> KernelSpec:
        return next(iter(self.binary_models.values())).kernel

    @property
    def n_features(self) -> int:
        return next(iter(self.binary_models.values())).n_features

    @property
    def converged(self) -> bool:
        return all(m.converged for m in self.binary_models.values())

    def votes(self, X) -> np.ndarray:
        """(n, n_classes) vote counts."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise ValueError(f"feature length {X.shape[1]} does not match model ({self.n_features})")
        pos = {c: i for i, c in enumerate(self.class_labels)}
        v = np.zeros((X.shape[0], self.n_classes), dtype=int)
        rows = np.arange(X.shape[0])
        for (a, b), m in sorted(self.binary_models.items()):
            win_a = m.predict(X) > 0
            np.add.at(v, (rows, np.where(win_a, pos[a], pos[b])), 1)
        return v

    def predict(self, X) -> np.ndarray:
        """Majority vote; ties go to the lowest class label."""
        v = self.votes(X)
        order = np.argsort(self.class_labels, kind="stable")
        labels = np.asarray(self.class_labels)[order]
        return labels[np.argmax(v[:, order], axis=1)]


def ovo_train(data: TrainingSet, kernel: KernelSpec, C: float = 10.0, tol: float = 1e-3,
              class_to_subrange: Mapping[int, tuple] | None = None,
              max_iter: int | None = None, allow_unconverged: bool = False) -> MulticlassSvmModel:
    """Train n(n-1)/2 binary machines, one per class pair.

    The training Gram matrix is computed once and sliced per pair when it fits in
    memory. SmoConvergenceError from any pair propagates unless
    ``allow_unconverged``, in which case the partial machine is kept (its
    ``converged`` flag stays False).
    """
    labels = tuple(range(data.class_count))
    n = len(data)
    K_all = gram(kernel, data.X, data.X) if n <= 4096 else None
    models = {}
    for a, b in itertools.combinations(labels, 2):
        idx = np.flatnonzero((data.labels == a) | (data.labels == b))
        y = np.where(data.labels[idx] == a, 1.0, -1.0)
        K = K_all[np.ix_(idx, idx)] if K_all is not None else None
        try:
            models[(a, b)] = smo_train(data.X[idx], y, kernel, C, tol, max_iter, K=K)
        except SmoConvergenceError as exc:
            if not allow_unconverged:
                raise
            log.warning("pair (%d, %d): %s", a, b, exc)
            models[(a, b)] = exc.model
        log.debug("pair (%d, %d): %d SVs", a, b, models[(a, b)].alpha_y.size)
    return MulticlassSvmModel(models, labels, dict(class_to_subrange or {}))


def ovo_classify(model: MulticlassSvmModel, x):
    """(label, subrange) for one feature vector; subrange is None if unmapped."""
    label = int(model.predict(np.asarray(x, dtype=float)[None, :])[0])
    return label, model.class_to_subrange.get(label)


def classification_accuracy(model, X: np.ndarray | Sequence, labels) -> float:
    """Fraction of correctly classified vectors. ``model`` needs a ``predict(X)`` method."""
    labels = np.asarray(labels).ravel()
    if labels.size == 0:
        raise ValueError("empty test set")
    pred = np.asarray(model.predict(np.atleast_2d(np.asarray(X, dtype=float)))).ravel()
    return float(np.count_nonzero(pred == labels)) / labels.size
