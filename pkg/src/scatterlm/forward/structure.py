"""Parametric 1D grating stacks and the incidence configuration."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence, Union

import numpy as np
import yaml

__all__ = [
    "StructureError",
    "Layer",
    "StructureModel",
    "IncidenceConfig",
    "Slab",
    "slice_trapezoid",
    "load_structure",
    "wavelength_grid",
]

Length = Union[float, str]
LAYER_KINDS = ("film", "lamellar", "trapezoid")


class StructureError(ValueError):
    """Invalid geometry, binding, or incidence settings."""


@dataclass(frozen=True)
class Layer:
    """One layer of the stack, listed top to bottom.

    Geometric fields hold either a number (nm) or the name of a fit parameter.
    ``film`` layers use only ``line``; ``lamellar`` uses ``width``; ``trapezoid``
    uses ``top_width`` and ``bottom_width``. ``n_slices`` overrides the
    structure-wide staircase count for a trapezoid.
    """

    kind: str
    thickness: Length
    line: str
    groove: str | None = None
    width: Length | None = None
    top_width: Length | None = None
    bottom_width: Length | None = None
    n_slices: int | None = None

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise StructureError(f"unknown layer kind {self.kind!r}; expected one of {LAYER_KINDS}")
        if self.kind != "film" and self.groove is None:
            raise StructureError(f"{self.kind} layer needs a groove material")
        if self.kind == "lamellar" and self.width is None:
            raise StructureError("lamellar layer needs a width")
        if self.kind == "trapezoid" and (self.top_width is None or self.bottom_width is None):
            raise StructureError("trapezoid layer needs top_width and bottom_width")
        if self.n_slices is not None and int(self.n_slices) < 1:
            raise StructureError("n_slices must be >= 1")

    def slots(self) -> dict[str, Length]:
        names = {"film": ("thickness",), "lamellar": ("thickness", "width"),
                 "trapezoid": ("thickness", "top_width", "bottom_width")}[self.kind]
        return {name: getattr(self, name) for name in names}

    def bind(self, params: Mapping[str, float]) -> "Layer":
        """Replace parameter names by values; unknown names raise."""
        updates = {}
        for slot, value in self.slots().items():
            if isinstance(value, str):
                if value not in params:
                    raise StructureError(f"missing value for parameter {value!r}")
                updates[slot] = float(params[value])
            else:
                updates[slot] = float(value)
        return replace(self, **updates)

    @property
    def is_bound(self) -> bool:
        return not any(isinstance(v, str) for v in self.slots().values())


@dataclass(frozen=True)
class Slab:
    """A concrete lamellar slab ready for the solver. ``fill`` is width / pitch."""

    thickness: float
    line: str
    groove: str
    fill: float


def slice_trapezoid(layer: Layer, n_slices: int) -> list[Layer]:
    """Staircase a bound trapezoid into ``n_slices`` lamellar layers of equal thickness.

    Each slice takes the trapezoid width at its own mid-height; slices are
    returned top to bottom.
    """
    if n_slices < 1:
        raise StructureError("n_slices must be >= 1")
    if layer.kind != "trapezoid" or not layer.is_bound:
        raise StructureError("slice_trapezoid needs a bound trapezoid layer")
    top, bottom, height = float(layer.top_width), float(layer.bottom_width), float(layer.thickness)
    dz = height / n_slices
    # fractional depth of each slice centre, 0 = top
    depth = (np.arange(n_slices) + 0.5) / n_slices
    widths = top + (bottom - top) * depth
    return [Layer("lamellar", dz, layer.line, layer.groove, width=float(w)) for w in widths]


@dataclass(frozen=True)
class StructureModel:
    """Grating description: pitch, half-space media, layers, and fit parameters."""

    pitch: float
    ambient: str
    substrate: str
    layers: tuple[Layer, ...]
    parameters: tuple[str, ...] = ()
    name: str = "structure"
    n_slices: int = 16
    truncation_order: int = 12

    def __post_init__(self):
        if not self.pitch > 0:
            raise StructureError("pitch must be positive")
        object.__setattr__(self, "layers", tuple(self.layers))
        referenced: list[str] = []
        for layer in self.layers:
            for value in layer.slots().values():
                if isinstance(value, str) and value not in referenced:
                    referenced.append(value)
        params = tuple(self.parameters) if self.parameters else tuple(referenced)
        if len(set(params)) != len(params):
            raise StructureError("duplicate parameter names")
        unbound = [p for p in params if p not in referenced]
        if unbound:
            raise StructureError(f"parameters not bound to any layer slot: {unbound}")
        unknown = [p for p in referenced if p not in params]
        if unknown:
            raise StructureError(f"layer slots reference undeclared parameters: {unknown}")
        object.__setattr__(self, "parameters", params)

    @property
    def materials(self) -> list[str]:
        names = [self.ambient, self.substrate]
        for layer in self.layers:
            names += [layer.line] + ([layer.groove] if layer.groove else [])
        return sorted(set(names))

    def bindings(self) -> dict[str, list[tuple[int, str]]]:
        """Parameter name -> list of (layer index, slot name) it drives."""
        out: dict[str, list[tuple[int, str]]] = {p: [] for p in self.parameters}
        for i, layer in enumerate(self.layers):
            for slot, value in layer.slots().items():
                if isinstance(value, str):
                    out[value].append((i, slot))
        return out

    def bind(self, params: Mapping[str, float]) -> list[Layer]:
        missing = [p for p in self.parameters if p not in params]
        if missing:
            raise StructureError(f"missing parameter values: {missing}")
        layers = [layer.bind(params) for layer in self.layers]
        for i, layer in enumerate(layers):
            t = float(layer.thickness)
            if not np.isfinite(t) or t < 0:
                raise StructureError(f"layer {i}: thickness must be >= 0, got {t}")
            for slot in ("width", "top_width", "bottom_width"):
                w = getattr(layer, slot)
                if w is None:
                    continue
                lo_ok = w >= 0 if layer.kind == "lamellar" else w > 0
                if not (lo_ok and w <= self.pitch):
                    raise StructureError(
                        f"layer {i}: {slot}={w} nm outside (0, pitch={self.pitch}] nm"
                    )
        return layers

    def slabs(self, params: Mapping[str, float], n_slices: int | None = None) -> list[Slab]:
        """Concrete lamellar slabs top to bottom; zero-thickness layers vanish."""
        out: list[Slab] = []
        for layer in self.bind(params):
            if float(layer.thickness) == 0.0:
                continue
            if layer.kind == "film":
                out.append(Slab(float(layer.thickness), layer.line, layer.line, 1.0))
            elif layer.kind == "lamellar":
                out.append(Slab(float(layer.thickness), layer.line, layer.groove,
                                float(layer.width) / self.pitch))
            else:
                count = layer.n_slices or n_slices or self.n_slices
                for s in slice_trapezoid(layer, count):
                    out.append(Slab(float(s.thickness), s.line, s.groove, float(s.width) / self.pitch))
        return out

    def to_dict(self) -> dict:
        layers = []
        for layer in self.layers:
            d = {"kind": layer.kind, "thickness": layer.thickness, "line": layer.line}
            for key in ("groove", "width", "top_width", "bottom_width", "n_slices"):
                if getattr(layer, key) is not None:
                    d[key] = getattr(layer, key)
            layers.append(d)
        return {
            "name": self.name, "pitch": self.pitch, "ambient": self.ambient,
            "substrate": self.substrate, "parameters": list(self.parameters),
            "n_slices": self.n_slices, "truncation_order": self.truncation_order,
            "layers": layers,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "StructureModel":
        try:
            layers = tuple(Layer(**dict(d)) for d in data["layers"])
            return cls(
                pitch=float(data["pitch"]), ambient=data.get("ambient", "Air"),
                substrate=data["substrate"], layers=layers,
                parameters=tuple(data.get("parameters", ())),
                name=data.get("name", "structure"),
                n_slices=int(data.get("n_slices", 16)),
                truncation_order=int(data.get("truncation_order", 12)),
            )
        except (KeyError, TypeError) as exc:
            raise StructureError(f"malformed structure definition: {exc}") from None

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def load_structure(path) -> StructureModel:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise StructureError(f"{path}: expected a mapping at top level")
    return StructureModel.from_dict(data)


def wavelength_grid(start: float = 200.0, stop: float = 800.0, step: float = 10.0) -> np.ndarray:
    count = int(round((stop - start) / step)) + 1
    return start + step * np.arange(count)


@dataclass(frozen=True)
class IncidenceConfig:
    """Planar-mount illumination: polar angle, azimuth (must be 0), wavelengths (nm).

    ``truncation_order`` keeps diffraction orders -N..N; ``None`` defers to the
    structure's own default.
    """

    angle_of_incidence: float = 65.0
    wavelengths: np.ndarray = field(default_factory=wavelength_grid)
    azimuth: float = 0.0
    truncation_order: int | None = None
    n_slices: int | None = None

    def __post_init__(self):
        wl = np.asarray(self.wavelengths, dtype=float).ravel()
        if wl.size < 1 or np.any(np.diff(wl) <= 0):
            raise StructureError("wavelength grid must be strictly increasing")
        wl.setflags(write=False)
        object.__setattr__(self, "wavelengths", wl)
        if not 0 <= self.angle_of_incidence < 90:
            raise StructureError("angle of incidence must lie in [0, 90) degrees")
        if self.azimuth != 0:
            raise StructureError("only planar mounting (azimuth 0) is supported")
        if self.truncation_order is not None and int(self.truncation_order) < 0:
            raise StructureError("truncation order must be >= 0")

    def order_for(self, structure: StructureModel) -> int:
        return int(self.truncation_order if self.truncation_order is not None
                   else structure.truncation_order)

    def with_wavelengths(self, wavelengths: Sequence[float]) -> "IncidenceConfig":
        return replace(self, wavelengths=np.asarray(wavelengths, dtype=float))
