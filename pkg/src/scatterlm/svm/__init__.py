"""Kernel SVM classification: SMO training, three kernels, one-vs-one voting."""

from .io import FORMAT_VERSION, read_model, read_training_set, write_model, write_training_set
from .kernels import KERNEL_KINDS, KernelSpec, gram, kernel_eval
from .multiclass import MulticlassSvmModel, TrainingSet, classification_accuracy, ovo_classify, ovo_train
from .smo import (
    BinarySvmModel,
    DualSolution,
    SmoConvergenceError,
    decision,
    dual_objective,
    kkt_violations,
    smo_train,
    solve_dual,
)

__all__ = [
    "BinarySvmModel", "DualSolution", "FORMAT_VERSION", "KERNEL_KINDS", "KernelSpec",
    "MulticlassSvmModel", "SmoConvergenceError", "TrainingSet", "classification_accuracy",
    "decision", "dual_objective", "gram", "kernel_eval", "kkt_violations", "ovo_classify",
    "ovo_train", "read_model", "read_training_set", "smo_train", "solve_dual", "write_model",
    "write_training_set",
]
