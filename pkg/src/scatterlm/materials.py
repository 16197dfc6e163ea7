"""Tabulated optical constants with linear interpolation in wavelength."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

__all__ = [
    "DispersionError",
    "DispersionTable",
    "MaterialLibrary",
    "load_dispersion",
    "refractive_index",
    "default_materials_dir",
]


class DispersionError(ValueError):
    """Malformed dispersion data or an out-of-range lookup."""


@dataclass(frozen=True)
class DispersionTable:
    """Optical constants n, k sampled on a strictly increasing wavelength grid (nm)."""

    material_name: str
    wavelength: np.ndarray
    n: np.ndarray
    k: np.ndarray

    def __post_init__(self):
        wl = np.asarray(self.wavelength, dtype=float)
        n = np.asarray(self.n, dtype=float)
        k = np.asarray(self.k, dtype=float)
        if wl.ndim != 1 or wl.shape != n.shape or wl.shape != k.shape:
            raise DispersionError(f"{self.material_name}: column length mismatch")
        if wl.size < 2:
            raise DispersionError(f"{self.material_name}: need at least 2 samples, got {wl.size}")
        if not np.all(np.isfinite(wl)) or not np.all(np.isfinite(n)) or not np.all(np.isfinite(k)):
            raise DispersionError(f"{self.material_name}: non-finite values")
        if np.any(np.diff(wl) <= 0):
            raise DispersionError(f"{self.material_name}: wavelengths must be strictly increasing")
        if np.any(k < 0):
            raise DispersionError(f"{self.material_name}: negative extinction coefficient")
        for name, arr in (("wavelength", wl), ("n", n), ("k", k)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def samples(self) -> list[tuple[float, float, float]]:
        return list(zip(self.wavelength.tolist(), self.n.tolist(), self.k.tolist()))

    @property
    def range(self) -> tuple[float, float]:
        return float(self.wavelength[0]), float(self.wavelength[-1])

    def __call__(self, wavelength):
        return refractive_index(self, wavelength)


def load_dispersion(path, material_name: str | None = None) -> DispersionTable:
    """Read a ``wavelength_nm n k`` text table; ``#`` lines are comments."""
    path = Path(path)
    name = material_name or path.stem
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise DispersionError(f"{path}:{lineno}: expected 3 columns, got {len(parts)}")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise DispersionError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise DispersionError(f"{path}: empty table")
    data = np.array(rows)
    return DispersionTable(name, data[:, 0], data[:, 1], data[:, 2])


def refractive_index(table: DispersionTable, wavelength):
    """Complex index n + ik at ``wavelength`` (scalar or array, nm).

    n and k are interpolated independently and linearly. Wavelengths outside the
    tabulated range raise instead of being clamped.
    """
    wl = np.asarray(wavelength, dtype=float)
    lo, hi = table.range
    if np.any(wl < lo) or np.any(wl > hi) or not np.all(np.isfinite(wl)):
        raise DispersionError(
            f"{table.material_name}: wavelength outside tabulated range [{lo}, {hi}] nm"
        )
    n = np.interp(wl, table.wavelength, table.n)
    k = np.interp(wl, table.wavelength, table.k)
    out = n + 1j * k
    return complex(out) if out.ndim == 0 else out


def default_materials_dir() -> Path:
    return Path(str(resources.files("scatterlm") / "data" / "materials"))


class MaterialLibrary:
    """Name -> DispersionTable lookup backed by a directory of ``<name>.txt`` files.

    Tables are loaded lazily and cached. ``vacuum`` and ``air`` (any case) resolve
    to the constant unit index.
    """

    _VACUUM = {"vacuum", "air", "ambient"}

    def __init__(self, directory=None):
        self.directory = Path(directory) if directory is not None else default_materials_dir()
        self._cache: dict[str, DispersionTable] = {}

    def path_for(self, name: str) -> Path:
        return self.directory / f"{name}.txt"

    def has(self, name: str) -> bool:
        return name.lower() in self._VACUUM or self.path_for(name).is_file()

    def get(self, name: str) -> DispersionTable:
        if name not in self._cache:
            if name.lower() in self._VACUUM and not self.path_for(name).is_file():
                table = DispersionTable(name, np.array([0.0, 1e9]), np.ones(2), np.zeros(2))
            else:
                path = self.path_for(name)
                if not path.is_file():
                    raise DispersionError(f"no dispersion file for material {name!r} in {self.directory}")
                table = load_dispersion(path, name)
            self._cache[name] = table
        return self._cache[name]

    def index(self, name: str, wavelength):
        return refractive_index(self.get(name), wavelength)

    def permittivity(self, name: str, wavelength):
        return np.asarray(self.index(name, wavelength)) ** 2
