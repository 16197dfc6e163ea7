"""Normalized Mueller-matrix signatures and their text format."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "ELEMENT_NAMES",
    "Signature",
    "jones_to_mueller",
    "mueller_from_jones",
    "read_signature",
    "write_signature",
]

#: The 15 stored elements, row-major with m11 omitted.
ELEMENT_NAMES = tuple(f"m{i}{j}" for i in range(1, 5) for j in range(1, 5))[1:]


def mueller_from_jones(r_tm, r_te):
    """Vectorized conversion: arrays of r_tm, r_te -> (..., 4, 4) normalized Mueller matrices.

    With r_tm / r_te = tan(Psi) exp(i Delta): N = cos 2Psi, C = sin 2Psi cos Delta,
    S = sin 2Psi sin Delta, written without forming the ratio so that r_te = 0 works.
    """
    r_tm = np.asarray(r_tm, dtype=complex)
    r_te = np.asarray(r_te, dtype=complex)
    a, b = np.abs(r_te) ** 2, np.abs(r_tm) ** 2
    total = a + b
    if np.any(total == 0):
        raise ValueError("r_tm and r_te are both zero; Mueller matrix undefined")
    cross = r_tm * np.conj(r_te)
    N = (a - b) / total
    C = 2 * cross.real / total
    S = 2 * cross.imag / total
    m = np.zeros(r_tm.shape + (4, 4))
    m[..., 0, 0] = m[..., 1, 1] = 1.0
    m[..., 0, 1] = m[..., 1, 0] = -N
    m[..., 2, 2] = m[..., 3, 3] = C
    m[..., 2, 3] = S
    m[..., 3, 2] = -S
    return m


def jones_to_mueller(r_tm: complex, r_te: complex) -> np.ndarray:
    """4x4 block-diagonal Mueller matrix (m11 = 1) of a non-depolarizing isotropic reflector."""
    return mueller_from_jones(r_tm, r_te)


@dataclass(frozen=True)
class Signature:
    """Mueller spectrum: wavelengths (nm) and one normalized 4x4 matrix per wavelength."""

    wavelengths: np.ndarray
    mueller: np.ndarray

    def __post_init__(self):
        wl = np.array(self.wavelengths, dtype=float).ravel()
        m = np.array(self.mueller, dtype=float)
        if m.shape != (wl.size, 4, 4):
            raise ValueError(f"mueller shape {m.shape} does not match {wl.size} wavelengths")
        if np.any(np.diff(wl) <= 0):
            raise ValueError("wavelengths must be strictly increasing")
        if not np.allclose(m[:, 0, 0], 1.0, rtol=0, atol=1e-12):
            raise ValueError("Mueller matrices must be normalized so that m11 = 1")
        wl.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "wavelengths", wl)
        object.__setattr__(self, "mueller", m)

    @classmethod
    def from_elements(cls, wavelengths, elements) -> "Signature":
        """Build from a (k, 15) array of the stored elements."""
        elements = np.asarray(elements, dtype=float)
        m = np.concatenate([np.ones((elements.shape[0], 1)), elements], axis=1)
        return cls(wavelengths, m.reshape(-1, 4, 4))

    @property
    def elements(self) -> np.ndarray:
        """(k, 15) array of m12 .. m44."""
        return self.mueller.reshape(-1, 16)[:, 1:]

    def __len__(self):
        return self.wavelengths.size

    def at(self, wavelengths) -> "Signature":
        """Restrict to a subset of the grid (exact matches only)."""
        wavelengths = np.asarray(wavelengths, dtype=float)
        idx = np.searchsorted(self.wavelengths, wavelengths)
        idx = np.clip(idx, 0, len(self) - 1)
        if not np.allclose(self.wavelengths[idx], wavelengths, rtol=0, atol=1e-9):
            raise ValueError("requested wavelengths are not on the signature grid")
        return Signature(self.wavelengths[idx], self.mueller[idx])

    def __eq__(self, other):
        if not isinstance(other, Signature):
            return NotImplemented
        return (np.array_equal(self.wavelengths, other.wavelengths)
                and np.array_equal(self.mueller, other.mueller))

    __hash__ = None


def write_signature(sig: Signature, path) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("lambda_nm " + " ".join(ELEMENT_NAMES) + "\n")
        for wl, row in zip(sig.wavelengths, sig.elements):
            fh.write(f"{wl:.6g} " + " ".join(f"{v:.17g}" for v in row) + "\n")


def read_signature(path) -> Signature:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ValueError(f"{path}: empty signature file")
    header = lines[0].split()
    if header != ["lambda_nm", *ELEMENT_NAMES]:
        raise ValueError(f"{path}: unexpected header {header[:3]}...")
    try:
        data = np.array([[float(v) for v in ln.split()] for ln in lines[1:]])
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    if data.ndim != 2 or data.shape[1] != 16:
        raise ValueError(f"{path}: expected 16 columns per row")
    return Signature.from_elements(data[:, 0], data[:, 1:])
