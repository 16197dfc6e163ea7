"""Polynomial, RBF and sigmoid kernels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

__all__ = ["KernelSpec", "kernel_eval", "gram"]

KERNEL_KINDS = ("polynomial", "rbf", "sigmoid")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel kind plus its single controlling factor.

    polynomial: (x . x')**d with integer d >= 1
    rbf:        exp(-||x - x'|| / sigma), the Euclidean norm NOT squared;
                ``rbf_squared=True`` switches to the Gaussian exp(-||x - x'||**2 / sigma)
    sigmoid:    tanh(beta * x . x')
    """

    kind: str
    controlling_factor: float
    rbf_squared: bool = False

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel {self.kind!r}; expected one of {KERNEL_KINDS}")
        c = float(self.controlling_factor)
        if self.kind == "polynomial" and (c < 1 or c != int(c)):
            raise ValueError("polynomial degree must be an integer >= 1")
        if self.kind == "rbf" and not c > 0:
            raise ValueError("rbf sigma must be positive")
        object.__setattr__(self, "controlling_factor", int(c) if self.kind == "polynomial" else c)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "controlling_factor": self.controlling_factor,
                "rbf_squared": self.rbf_squared}

    @classmethod
    def from_dict(cls, d) -> "KernelSpec":
        return cls(d["kind"], d["controlling_factor"], bool(d.get("rbf_squared", False)))

    def __str__(self):
        sym = {"polynomial": "d", "rbf": "sigma", "sigmoid": "beta"}[self.kind]
        tail = ", squared" if self.kind == "rbf" and self.rbf_squared else ""
        return f"{self.kind}({sym}={self.controlling_factor}{tail})"


def kernel_eval(spec: KernelSpec, x, x2) -> float:
    x = np.asarray(x, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x.shape != x2.shape:
        raise ValueError(f"feature length mismatch: {x.shape} vs {x2.shape}")
    return float(gram(spec, x[None, :], x2[None, :])[0, 0])


def gram(spec: KernelSpec, X, Y) -> np.ndarray:
    """Kernel matrix K[i, j] = k(X[i], Y[j])."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"feature length mismatch: {X.shape[1]} vs {Y.shape[1]}")
    c = spec.controlling_factor
    if spec.kind == "rbf":
        if spec.rbf_squared:
            return np.exp(-cdist(X, Y, "sqeuclidean") / c)
        return np.exp(-cdist(X, Y, "euclidean") / c)
    dot = X @ Y.T
    if spec.kind == "polynomial":
        return dot**c
    return np.tanh(c * dot)
