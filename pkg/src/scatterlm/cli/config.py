"""Run configuration: one YAML file, every field defaulted and overridable."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from ..forward.structure import IncidenceConfig, StructureModel, load_structure, wavelength_grid
from ..lm_solver import LmConfig
from ..materials import MaterialLibrary, default_materials_dir
from ..pipeline import ParameterSpace, SvmConfig, SweepGrid
from ..signature import ErrorSpec
from ..svm import KernelSpec

__all__ = ["ConfigError", "RunConfig", "DEFAULTS", "load_config", "packaged_config", "apply_overrides"]


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


DEFAULTS: dict = {
    "structure": "si_grating.yaml",
    "materials": None,
    "parameters": None,
    "incidence": {
        "angle_of_incidence": 65.0,
        "azimuth": 0.0,
        "wavelengths": {"start": 200.0, "stop": 800.0, "step": 10.0},
        "truncation_order": None,
        "n_slices": None,
    },
    "fit": {"wavelengths": None},
    "svm": {
        "kernel": {"kind": "rbf", "controlling_factor": 1.0, "rbf_squared": False},
        "C": 10.0,
        "tol": 1e-3,
        "max_iter": None,
        "k_points": 7,
    },
    "lm": {},
    "errors": {"random_magnitude": 0.0, "offset_magnitude": 0.0},
    "seeds": {"training": 1, "benchmark": 2, "noise": 3, "test": [4]},
    "bench": {
        "n_cases": 100,
        "methods": ["svm_lm", "lm_only"],
        "lm_only_init": "median",
        "n_test": 100,
        "param_index": 0,
        "kernel_sweep": {
            "kernels": [
                {"kind": "polynomial", "controlling_factor": d} for d in (1, 2, 3, 4, 5)
            ] + [
                {"kind": "rbf", "controlling_factor": s} for s in (0.1, 0.5, 1.0, 5.0, 10.0)
            ] + [
                {"kind": "sigmoid", "controlling_factor": b} for b in (0.01, 0.1, 1.0, 10.0, 100.0)
            ],
            "k_points": [7],
            "samples_per_subrange": [None],
            "errors": [[0.0, 0.0]],
        },
        "noise_sweep": {
            "kernels": [{"kind": "rbf", "controlling_factor": 1.0},
                        {"kind": "polynomial", "controlling_factor": 5}],
            "k_points": [7],
            "samples_per_subrange": [None],
            "errors": [[0.0, o] for o in (0.0, 0.02, 0.04, 0.06, 0.08, 0.10)]
                      + [[r, 0.0] for r in (0.02, 0.04, 0.06, 0.08, 0.10)],
        },
        "training_size": {
            "kernels": [{"kind": "rbf", "controlling_factor": 1.0}],
            "k_points": [7],
            "samples_per_subrange": [2, 4, 8],
            "errors": [[0.0, 0.0]],
        },
    },
    "output_dir": "scatterlm-out",
    "workers": None,
}


def _merge(base: dict, over: Mapping) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def apply_overrides(data: dict, overrides) -> dict:
    """``key.sub=value`` strings; values are parsed as YAML scalars or lists."""
    data = copy.deepcopy(data)
    for item in overrides or ():
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {item!r} is not of the form key.path=value")
        node = data
        parts = key.split(".")
        for p in parts[:-1]:
            if not isinstance(node.get(p), dict):
                node[p] = {}
            node = node[p]
        node[parts[-1]] = yaml.safe_load(raw)
    return data


def packaged_config(name: str) -> Path:
    path = Path(str(resources.files("scatterlm") / "data" / "configs" / name))
    if not path.suffix:
        path = path.with_suffix(".yaml")
    return path


def _grid(spec) -> np.ndarray | None:
    if spec is None:
        return None
    if isinstance(spec, Mapping):
        return wavelength_grid(float(spec["start"]), float(spec["stop"]), float(spec["step"]))
    return np.asarray(spec, dtype=float)


@dataclass
class RunConfig:
    data: dict
    base_dir: Path

    # -- resolved objects -------------------------------------------------
    @property
    def structure_path(self) -> Path:
        raw = Path(str(self.data["structure"]))
        candidates = [raw] if raw.is_absolute() else [self.base_dir / raw]
        candidates.append(Path(str(resources.files("scatterlm") / "data" / "structures")) / raw.name)
        for c in candidates:
            if c.is_file():
                return c
        raise ConfigError(f"structure file {raw} not found")

    def structure(self) -> StructureModel:
        return load_structure(self.structure_path)

    def materials(self) -> MaterialLibrary:
        m = self.data.get("materials")
        if m is None:
            return MaterialLibrary(default_materials_dir())
        p = Path(str(m))
        return MaterialLibrary(p if p.is_absolute() else self.base_dir / p)

    def space(self) -> ParameterSpace:
        if not self.data.get("parameters"):
            raise ConfigError("config has no parameter space")
        return ParameterSpace.from_dict(self.data["parameters"])

    def incidence(self) -> IncidenceConfig:
        inc = self.data["incidence"]
        return IncidenceConfig(float(inc["angle_of_incidence"]), _grid(inc["wavelengths"]),
                               float(inc.get("azimuth", 0.0)), inc.get("truncation_order"),
                               inc.get("n_slices"))

    def fit_wavelengths(self):
        return _grid(self.data.get("fit", {}).get("wavelengths"))

    def fit_incidence(self) -> IncidenceConfig:
        wl = self.fit_wavelengths()
        inc = self.incidence()
        return inc if wl is None else inc.with_wavelengths(wl)

    def kernel(self) -> KernelSpec:
        return KernelSpec.from_dict(self.data["svm"]["kernel"])

    def svm_config(self) -> SvmConfig:
        return SvmConfig.from_dict(self.data["svm"])

    @property
    def k_points(self) -> int:
        return int(self.data["svm"]["k_points"])

    def lm_config(self) -> LmConfig:
        return LmConfig.from_dict(self.data.get("lm"))

    def error_spec(self) -> ErrorSpec:
        e = self.data["errors"]
        return ErrorSpec(float(e["random_magnitude"]), float(e["offset_magnitude"]), int(self.seeds["noise"]))

    @property
    def seeds(self) -> dict:
        return self.data["seeds"]

    def sweep_grid(self, study: str) -> SweepGrid:
        g = self.data["bench"][study]
        kernels = tuple(KernelSpec.from_dict(k) for k in g["kernels"])
        tests = self.seeds.get("test", [0])
        tests = tests if isinstance(tests, list) else [tests]
        return SweepGrid(kernels, tuple(int(k) for k in g["k_points"]),
                         tuple(None if s is None else int(s) for s in g["samples_per_subrange"]),
                         tuple(tuple(e) for e in g["errors"]), tuple(int(t) for t in tests))

    @property
    def output_dir(self) -> Path:
        p = Path(str(self.data["output_dir"]))
        return p if p.is_absolute() else Path.cwd() / p

    @property
    def workers(self):
        return self.data.get("workers")

    # -- validation and identity -------------------------------------------
    def validate(self) -> "RunConfig":
        """Check every reference before any compute starts."""
        try:
            structure = self.structure()
            space = self.space()
            space.check_structure(structure.parameters)
            lib = self.materials()
            if not lib.directory.is_dir():
                raise ConfigError(f"materials directory {lib.directory} does not exist")
            inc = self.incidence()
            fit = self.fit_incidence()
            for name in structure.materials:
                if not lib.has(name):
                    raise ConfigError(f"no dispersion file for material {name!r} in {lib.directory}")
                lo, hi = lib.get(name).range
                for wl in (inc.wavelengths, fit.wavelengths):
                    if wl.min() < lo or wl.max() > hi:
                        raise ConfigError(f"{name}: dispersion table covers {lo}-{hi} nm, "
                                          f"grid needs {wl.min()}-{wl.max()} nm")
            if not set(fit.wavelengths.tolist()) <= set(inc.wavelengths.tolist()):
                raise ConfigError("fit wavelengths must be a subset of the incidence grid")
            self.kernel()
            self.svm_config()
            self.lm_config()
            self.error_spec()
            if not 2 <= self.k_points <= inc.wavelengths.size:
                raise ConfigError("svm.k_points must lie between 2 and the grid size")
        except ConfigError:
            raise
        except (ValueError, KeyError, TypeError, FileNotFoundError) as exc:
            raise ConfigError(f"{type(exc).__name__}: {exc}") from None
        return self

    def resolved(self) -> dict:
        d = copy.deepcopy(self.data)
        d["structure"] = str(self.structure_path)
        d["structure_hash"] = self.structure().hash()
        d["materials"] = str(self.materials().directory)
        d.pop("output_dir", None)
        d.pop("workers", None)
        return d

    def hash(self) -> str:
        blob = json.dumps(self.resolved(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def load_config(path=None, overrides=()) -> RunConfig:
    """Load a YAML run config (or just the defaults), apply overrides."""
    data: dict[str, Any] = {}
    base = Path.cwd()
    if path is not None:
        p = Path(path)
        if not p.is_file():
            alt = packaged_config(str(path))
            if not alt.is_file():
                raise ConfigError(f"config file {path} not found")
            p = alt
        with open(p, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"{p}: top level must be a mapping")
        base = p.parent
    merged = _merge(DEFAULTS, data)
    return RunConfig(apply_overrides(merged, overrides), base)
