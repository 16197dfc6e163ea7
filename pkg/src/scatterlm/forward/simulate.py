"""Structure + parameters -> reflection coefficients and Mueller signatures."""

from __future__ import annotations

from collections import defaultdict
from typing import Mapping, Sequence

import numpy as np

from ..materials import MaterialLibrary
from .mueller import Signature, mueller_from_jones
from .rcwa import StackArrays, efficiencies, solve_stack
from .structure import IncidenceConfig, StructureModel

__all__ = [
    "ForwardModel",
    "rcwa_reflection",
    "simulate_signature",
    "diffraction_efficiencies",
]

# soft cap on complex elements held per (B, L, n, n) work array
_WORK_ELEMENTS = 2_000_000


class ForwardModel:
    """Vectorized forward solver bound to one structure, incidence and material set.

    All public methods are pure: the result for a parameter set does not depend
    on what else is evaluated in the same call.
    """

    def __init__(self, structure: StructureModel, incidence: IncidenceConfig,
                 materials: MaterialLibrary | None = None):
        self.structure = structure
        self.incidence = incidence
        self.materials = materials or MaterialLibrary()
        self.order = incidence.order_for(structure)
        self.n_slices = incidence.n_slices or structure.n_slices
        self._eps_cache: dict[tuple, np.ndarray] = {}

    @property
    def wavelengths(self) -> np.ndarray:
        return self.incidence.wavelengths

    def _eps(self, name: str, wl: np.ndarray) -> np.ndarray:
        key = (name, wl.tobytes())
        if key not in self._eps_cache:
            self._eps_cache[key] = np.asarray(self.materials.permittivity(name, wl), dtype=complex)
        return self._eps_cache[key]

    def _stacks(self, params_list: Sequence[Mapping[str, float]], wl: np.ndarray):
        """Yield (item indices, StackArrays) with items x wavelengths flattened, chunked."""
        s = self.structure
        groups: dict[tuple, list[int]] = defaultdict(list)
        slabs_all = []
        for i, params in enumerate(params_list):
            slabs = s.slabs(params, self.n_slices)
            slabs_all.append(slabs)
            groups[tuple((sl.line, sl.groove) for sl in slabs)].append(i)

        N = self.order
        n = 2 * N + 1
        m = np.arange(-N, N + 1)
        eps_amb = self._eps(s.ambient, wl)
        eps_sub = self._eps(s.substrate, wl)
        kx = (np.sqrt(eps_amb).real * np.sin(np.radians(self.incidence.angle_of_incidence)))[:, None] \
            + m[None, :] * (wl[:, None] / s.pitch)
        k0 = 2 * np.pi / wl

        for template, items in groups.items():
            L = len(template)
            eps_line = np.stack([self._eps(a, wl) for a, _ in template], axis=-1) if L else np.zeros((wl.size, 0), complex)
            eps_groove = np.stack([self._eps(b, wl) for _, b in template], axis=-1) if L else np.zeros((wl.size, 0), complex)
            per_item = max(1, wl.size * max(L, 1) * n * n)
            chunk = max(1, _WORK_ELEMENTS // per_item)
            for start in range(0, len(items), chunk):
                sub = items[start:start + chunk]
                P = len(sub)
                fill = np.array([[sl.fill for sl in slabs_all[i]] for i in sub]).reshape(P, 1, L)
                thick = np.array([[sl.thickness for sl in slabs_all[i]] for i in sub]).reshape(P, 1, L)
                B = P * wl.size
                stack = StackArrays(
                    kx=np.broadcast_to(kx, (P, wl.size, n)).reshape(B, n),
                    eps_ambient=np.broadcast_to(eps_amb, (P, wl.size)).reshape(B),
                    eps_substrate=np.broadcast_to(eps_sub, (P, wl.size)).reshape(B),
                    eps_line=np.broadcast_to(eps_line, (P, wl.size, L)).reshape(B, L),
                    eps_groove=np.broadcast_to(eps_groove, (P, wl.size, L)).reshape(B, L),
                    fill=np.broadcast_to(fill, (P, wl.size, L)).reshape(B, L),
                    thickness=(thick * k0[None, :, None]).reshape(B, L),
                )
                yield sub, stack

    def reflection(self, params_list: Sequence[Mapping[str, float]], wavelengths=None):
        """Specular (r_tm, r_te), each (P, W) complex."""
        wl = self.wavelengths if wavelengths is None else np.asarray(wavelengths, dtype=float)
        P = len(params_list)
        r_tm = np.empty((P, wl.size), dtype=complex)
        r_te = np.empty((P, wl.size), dtype=complex)
        c = self.order
        for items, stack in self._stacks(params_list, wl):
            for pol, out in (("TE", r_te), ("TM", r_tm)):
                R = solve_stack(stack, pol)["R"]
                out[items] = R[:, c, c].reshape(len(items), wl.size)
        return r_tm, r_te

    def mueller(self, params_list, wavelengths=None) -> np.ndarray:
        """(P, W, 4, 4) normalized Mueller matrices."""
        r_tm, r_te = self.reflection(params_list, wavelengths)
        return mueller_from_jones(r_tm, r_te)

    def signatures(self, params_list, wavelengths=None) -> list[Signature]:
        wl = self.wavelengths if wavelengths is None else np.asarray(wavelengths, dtype=float)
        m = self.mueller(params_list, wl)
        return [Signature(wl, mi) for mi in m]

    def signature(self, params: Mapping[str, float], wavelengths=None) -> Signature:
        return self.signatures([params], wavelengths)[0]

    def efficiencies(self, params: Mapping[str, float], pol: str, wavelengths=None):
        """(reflected, transmitted) efficiencies per order, each (W, n)."""
        wl = self.wavelengths if wavelengths is None else np.asarray(wavelengths, dtype=float)
        (_, stack), = list(self._stacks([params], wl))
        return efficiencies(stack, pol)


def simulate_signature(structure: StructureModel, params: Mapping[str, float],
                       incidence: IncidenceConfig, materials: MaterialLibrary | None = None) -> Signature:
    """Mueller signature of one parameter set over the incidence wavelength grid."""
    return ForwardModel(structure, incidence, materials).signature(params)


def rcwa_reflection(structure: StructureModel, params: Mapping[str, float], incidence: IncidenceConfig,
                    wavelength: float, polarization: str, materials: MaterialLibrary | None = None) -> complex:
    """Zero-order reflection coefficient (E_y for TE, H_y i.e. r_p for TM)."""
    if polarization not in ("TE", "TM"):
        raise ValueError("polarization must be 'TE' or 'TM'")
    r_tm, r_te = ForwardModel(structure, incidence, materials).reflection([params], [wavelength])
    return complex((r_te if polarization == "TE" else r_tm)[0, 0])


def diffraction_efficiencies(structure, params, incidence, wavelength, polarization, materials=None):
    return ForwardModel(structure, incidence, materials).efficiencies(params, polarization, [wavelength])
