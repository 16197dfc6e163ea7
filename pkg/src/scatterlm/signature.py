"""Feature extraction from Mueller signatures and synthetic measurement errors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forward.mueller import Signature

__all__ = [
    "ErrorSpec",
    "FeatureVector",
    "subsample_indices",
    "pick_indices",
    "subsample",
    "signature_rms",
    "inject_errors",
    "features",
]


@dataclass(frozen=True)
class FeatureVector:
    """Flattened elements at k wavelengths, wavelength-major, m12..m44 within each."""

    values: np.ndarray
    wavelengths: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        wl = np.asarray(self.wavelengths, dtype=float).ravel()
        if v.size != 15 * wl.size:
            raise ValueError("feature length must be 15 x number of wavelengths")
        if not np.all(np.isfinite(v)):
            raise ValueError("feature vector contains non-finite values")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "wavelengths", wl)

    def __len__(self):
        return self.values.size

    @property
    def k(self) -> int:
        return self.wavelengths.size


@dataclass(frozen=True)
class ErrorSpec:
    """Random and offset error magnitudes, as fractions of the signature rms."""

    random_magnitude: float = 0.0
    offset_magnitude: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("random_magnitude", "offset_magnitude"):
            v = float(getattr(self, name))
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
            object.__setattr__(self, name, v)
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def is_clean(self) -> bool:
        return self.random_magnitude == 0 and self.offset_magnitude == 0

    def with_seed(self, seed: int) -> "ErrorSpec":
        return ErrorSpec(self.random_magnitude, self.offset_magnitude, seed)


def subsample_indices(n_grid: int, k: int) -> np.ndarray:
    """Indices of k grid points equally spaced in index space, endpoints included."""
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > n_grid:
        raise ValueError(f"k={k} exceeds the {n_grid}-point grid")
    # round half up so the choice never depends on banker's rounding
    idx = np.floor(np.linspace(0, n_grid - 1, k) + 0.5).astype(int)
    return idx


def pick_indices(wavelengths: np.ndarray, k: int) -> np.ndarray:
    """k target wavelengths equally spaced over the grid span, snapped to the nearest grid point."""
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > wavelengths.size:
        raise ValueError(f"k={k} exceeds the {wavelengths.size}-point grid")
    targets = np.linspace(wavelengths[0], wavelengths[-1], k)
    idx = np.abs(wavelengths[None, :] - targets[:, None]).argmin(axis=1)
    if np.unique(idx).size != k:
        # non-uniform grid collapsed two targets; fall back to index spacing
        idx = subsample_indices(wavelengths.size, k)
    return idx


def subsample(sig: Signature, k: int) -> FeatureVector:
    idx = pick_indices(sig.wavelengths, k)
    return FeatureVector(sig.elements[idx].ravel(), sig.wavelengths[idx])


def features(mueller: np.ndarray, wavelengths, k: int) -> np.ndarray:
    """Batched subsample on (P, W, 4, 4) Mueller arrays -> (P, 15k)."""
    wl = np.asarray(wavelengths, dtype=float)
    m = np.asarray(mueller)
    idx = pick_indices(wl, k)
    return m[:, idx].reshape(m.shape[0], idx.size, 16)[:, :, 1:].reshape(m.shape[0], -1)


def signature_rms(sig: Signature) -> float:
    return float(np.sqrt(np.mean(sig.elements ** 2)))


def inject_errors(sig: Signature, spec: ErrorSpec) -> Signature:
    """Add Gaussian random errors (per element, per wavelength) and offset errors
    (one draw per element, shared by all wavelengths), both scaled by the rms."""
    if spec.is_clean:
        return sig
    s = signature_rms(sig)
    rng = np.random.default_rng(spec.seed)
    el = sig.elements
    random_err = rng.normal(0.0, 1.0, el.shape) * (spec.random_magnitude * s)
    offset_err = rng.normal(0.0, 1.0, el.shape[1]) * (spec.offset_magnitude * s)
    return Signature.from_elements(sig.wavelengths, el + random_err + offset_err[None, :])
