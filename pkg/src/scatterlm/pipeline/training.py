"""Training-set synthesis, per-parameter classifiers, sub-range mapping and reconstruction."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from ..forward.mueller import Signature
from ..forward.simulate import ForwardModel
from ..forward.structure import IncidenceConfig, StructureModel
from ..lm_solver import FitResult, LmConfig, lm_fit
from ..materials import MaterialLibrary
from ..signature import pick_indices
from ..svm import KernelSpec, MulticlassSvmModel, TrainingSet, ovo_train, read_model, write_model
from ..svm.io import FORMAT_VERSION
from .space import ParameterSpace
from .workers import SimulationCache

__all__ = [
    "SvmConfig",
    "ClassifierBundle",
    "SubrangeMapping",
    "Reconstruction",
    "BundleMismatchError",
    "feature_wavelengths",
    "generate_training_sets",
    "train_classifiers",
    "map_to_subranges",
    "reconstruct",
]

log = logging.getLogger(__name__)


class BundleMismatchError(ValueError):
    """Bundle trained for a different structure, or measured grid lacks its wavelengths."""


@dataclass(frozen=True)
class SvmConfig:
    C: float = 10.0
    tol: float = 1e-3
    max_iter: int | None = None

    @classmethod
    def from_dict(cls, d: Mapping | None) -> "SvmConfig":
        d = dict(d or {})
        return cls(float(d.get("C", 10.0)), float(d.get("tol", 1e-3)), d.get("max_iter"))


def feature_wavelengths(incidence: IncidenceConfig, k_points: int) -> np.ndarray:
    """The k wavelengths picked from the incidence grid for feature vectors."""
    wl = incidence.wavelengths
    return wl[pick_indices(wl, k_points)]


def _features(mueller: np.ndarray) -> np.ndarray:
    P, W = mueller.shape[:2]
    return mueller.reshape(P, W, 16)[:, :, 1:].reshape(P, W * 15)


def generate_training_sets(space: ParameterSpace, i: int, structure: StructureModel,
                           incidence: IncidenceConfig, k_points: int, seed: int,
                           materials: MaterialLibrary | None = None,
                           cache: SimulationCache | None = None, workers: int | None = None) -> TrainingSet:
    """Labelled feature vectors for parameter i, one class per sub-range.

    Signatures are simulated only at the k feature wavelengths; the solver is
    per-wavelength, so this equals subsampling a full-grid simulation.
    """
    space.check_structure(structure.parameters)
    if not 0 <= i < len(space):
        raise IndexError(f"parameter index {i} out of range")
    wl = feature_wavelengths(incidence, k_points)
    if cache is None:
        cache = SimulationCache(ForwardModel(structure, incidence, materials), workers)
    pts, labels = [], []
    for j in range(space[i].n_subranges):
        p = space.class_points(i, j, seed)
        pts.append(p)
        labels.append(np.full(len(p), j))
    pts = np.concatenate(pts)
    X = _features(cache.mueller(pts, space.names, wl))
    meta = {
        "parameter": space[i].name,
        "k": int(k_points),
        "wavelengths": [float(w) for w in wl],
        "subranges": [list(s) for s in space[i].subranges()],
        "design": space.design,
        "seed": int(seed),
        "structure_hash": structure.hash(),
    }
    return TrainingSet(X, np.concatenate(labels), space[i].n_subranges, meta)


@dataclass
class ClassifierBundle:
    """One multiclass model per parameter plus the metadata needed to use them."""

    models: dict
    wavelengths: np.ndarray
    kernel: KernelSpec
    structure_hash: str
    space: ParameterSpace
    incidence: dict = field(default_factory=dict)
    svm: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if list(self.models) != self.space.names:
            raise ValueError("bundle needs one model per parameter, in parameter order")
        for name, m in self.models.items():
            if m.n_classes != self.space[name].n_subranges:
                raise ValueError(f"{name}: model has {m.n_classes} classes, space slices "
                                 f"{self.space[name].n_subranges}")
        self.wavelengths = np.asarray(self.wavelengths, dtype=float)

    @property
    def k_points(self) -> int:
        return self.wavelengths.size

    def meta(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "parameters": self.space.names,
            "space": self.space.to_dict(),
            "wavelengths": [float(w) for w in self.wavelengths],
            "k_points": self.k_points,
            "kernel": self.kernel.to_dict(),
            "structure_hash": self.structure_hash,
            "incidence": self.incidence,
            "svm": self.svm,
            "seed": self.seed,
        }

    def save(self, directory) -> list[Path]:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        written = []
        for name, m in self.models.items():
            path = d / f"{name}.model.json"
            write_model(m, path, {"parameter": name, "structure_hash": self.structure_hash})
            written.append(path)
        path = d / "bundle.json"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.meta(), fh, indent=1, sort_keys=True)
            fh.write("\n")
        written.append(path)
        return written

    @classmethod
    def load(cls, directory) -> "ClassifierBundle":
        d = Path(directory)
        with open(d / "bundle.json", encoding="utf-8") as fh:
            meta = json.load(fh)
        if meta.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"{d}: unsupported bundle format version {meta.get('format_version')!r}")
        models = {name: read_model(d / f"{name}.model.json")[0] for name in meta["parameters"]}
        return cls(models, np.array(meta["wavelengths"]), KernelSpec.from_dict(meta["kernel"]),
                   meta["structure_hash"], ParameterSpace.from_dict(meta["space"]),
                   meta.get("incidence", {}), meta.get("svm", {}), int(meta.get("seed", 0)))

    def check_structure(self, structure: StructureModel) -> None:
        if structure.hash() != self.structure_hash:
            raise BundleMismatchError(
                f"bundle was trained for structure {self.structure_hash}, got {structure.hash()}")


def train_classifiers(space: ParameterSpace, structure: StructureModel, incidence: IncidenceConfig,
                      kernel: KernelSpec, k_points: int, svm_config: SvmConfig = SvmConfig(),
                      seed: int = 0, materials: MaterialLibrary | None = None,
                      cache: SimulationCache | None = None, workers: int | None = None,
                      training_sets: dict | None = None) -> ClassifierBundle:
    """Train one classifier per parameter. Generated training sets are stored
    into ``training_sets`` (name -> TrainingSet) when a dict is supplied."""
    if cache is None:
        cache = SimulationCache(ForwardModel(structure, incidence, materials), workers)
    models = {}
    for i, p in enumerate(space.params):
        t0 = time.perf_counter()
        ts = generate_training_sets(space, i, structure, incidence, k_points, seed, cache=cache)
        if training_sets is not None:
            training_sets[p.name] = ts
        models[p.name] = ovo_train(ts, kernel, svm_config.C, svm_config.tol,
                                   dict(enumerate(p.subranges())), svm_config.max_iter)
        log.info("trained %s classifier on %d pairs in %.1f s", p.name, len(ts), time.perf_counter() - t0)
    inc = {"angle_of_incidence": incidence.angle_of_incidence, "azimuth": incidence.azimuth,
           "truncation_order": incidence.order_for(structure)}
    return ClassifierBundle(models, feature_wavelengths(incidence, k_points), kernel, structure.hash(),
                            space, inc, {"C": svm_config.C, "tol": svm_config.tol}, int(seed))


@dataclass(frozen=True)
class SubrangeMapping:
    name: str
    label: int
    subrange: tuple
    median: float


def map_to_subranges(bundle: ClassifierBundle, measured: Signature) -> list[SubrangeMapping]:
    try:
        sub = measured.at(bundle.wavelengths)
    except ValueError as exc:
        raise BundleMismatchError(f"measured grid lacks the bundle wavelengths: {exc}") from None
    x = sub.elements.ravel()[None, :]
    out = []
    for name, model in bundle.models.items():
        label = int(model.predict(x)[0])
        a, b = model.class_to_subrange[label]
        out.append(SubrangeMapping(name, label, (a, b), (a + b) / 2))
    return out


@dataclass
class Reconstruction:
    mapping: list
    fit: FitResult
    svm_time: float
    lm_time: float

    @property
    def init(self) -> dict:
        return {m.name: m.median for m in self.mapping}


def reconstruct(measured: Signature, structure: StructureModel, space: ParameterSpace,
                bundle: ClassifierBundle, incidence: IncidenceConfig, lm_config: LmConfig = LmConfig(),
                materials: MaterialLibrary | None = None, model: ForwardModel | None = None) -> Reconstruction:
    """Map to sub-ranges, then fit from their medians with the rough ranges as bounds."""
    bundle.check_structure(structure)
    t0 = time.perf_counter()
    mapping = map_to_subranges(bundle, measured)
    svm_time = time.perf_counter() - t0
    init = {m.name: m.median for m in mapping}
    fit = lm_fit(measured, structure, init, space.bounds, incidence, lm_config, materials, model)
    return Reconstruction(mapping, fit, svm_time, fit.wall_time)
