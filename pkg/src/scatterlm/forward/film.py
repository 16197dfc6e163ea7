"""Abeles characteristic-matrix reflection of coherent homogeneous multilayers.

Independent of the modal solver; used to check it in the uniform-layer limit.
TM uses the H-field admittance kz/eps so that r_tm matches the ellipsometric
r_p returned by the grating solver.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

__all__ = ["film_reflection", "fresnel"]


def fresnel(eps_a: complex, eps_s: complex, kx: float, polarization: str) -> complex:
    """Single-interface reflection coefficient."""
    kza, kzs = np.sqrt(eps_a - kx**2 + 0j), np.sqrt(eps_s - kx**2 + 0j)
    if polarization == "TE":
        return (kza - kzs) / (kza + kzs)
    return (eps_s * kza - eps_a * kzs) / (eps_s * kza + eps_a * kzs)


def film_reflection(
    eps_ambient: complex,
    eps_substrate: complex,
    films: Sequence[tuple[complex, float]],
    wavelength: float,
    angle_deg: float,
    polarization: str,
) -> complex:
    """Reflection coefficient of ``films`` = [(eps, thickness_nm), ...] listed top to bottom."""
    if polarization not in ("TE", "TM"):
        raise ValueError("polarization must be 'TE' or 'TM'")
    k0 = 2 * np.pi / wavelength
    kx = np.sqrt(eps_ambient + 0j).real * np.sin(np.radians(angle_deg))

    def admittance(eps):
        kz = np.sqrt(eps - kx**2 + 0j)
        return kz, (kz if polarization == "TE" else kz / eps)

    M = np.eye(2, dtype=complex)
    for eps, d in films:
        kz, eta = admittance(eps)
        delta = kz * k0 * d
        c, s = np.cos(delta), np.sin(delta)
        M = M @ np.array([[c, -1j * s / eta], [-1j * eta * s, c]])
    _, eta_a = admittance(eps_ambient)
    _, eta_s = admittance(eps_substrate)
    B, C = M @ np.array([1.0, eta_s])
    return complex((eta_a * B - C) / (eta_a * B + C))
