"""End-to-end flow: sub-range slicing, training synthesis, classifier bundles,
SVM-seeded LM reconstruction, and the benchmark studies."""

from .bench import (
    METHODS,
    BenchReport,
    CaseRecord,
    SweepGrid,
    SweepRow,
    SweepTable,
    case_seed,
    kernel_sweep,
    run_benchmark,
)
from .space import DESIGNS, ParameterSpace, ParamSpec
from .training import (
    BundleMismatchError,
    ClassifierBundle,
    Reconstruction,
    SubrangeMapping,
    SvmConfig,
    feature_wavelengths,
    generate_training_sets,
    map_to_subranges,
    reconstruct,
    train_classifiers,
)
from .workers import SimulationCache, SimulationError, map_jobs, simulate_mueller, worker_count

__all__ = [
    "BenchReport", "BundleMismatchError", "CaseRecord", "ClassifierBundle", "DESIGNS", "METHODS",
    "ParamSpec", "ParameterSpace", "Reconstruction", "SimulationCache", "SimulationError",
    "SubrangeMapping", "SvmConfig", "SweepGrid", "SweepRow", "SweepTable", "case_seed",
    "feature_wavelengths", "generate_training_sets", "kernel_sweep", "map_jobs", "map_to_subranges",
    "reconstruct", "run_benchmark", "simulate_mueller", "train_classifiers", "worker_count",
]
