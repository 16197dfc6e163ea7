"""Benchmark harness: SVM/LM versus plain LM on synthetic noisy targets, and
classification-accuracy sweeps over kernels, wavelength counts, training size
and measurement errors."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..forward.mueller import Signature
from ..forward.simulate import ForwardModel
from ..forward.structure import IncidenceConfig, StructureModel
from ..lm_solver import LmConfig, lm_fit
from ..materials import MaterialLibrary
from ..signature import ErrorSpec, inject_errors
from ..svm import KernelSpec, classification_accuracy, ovo_train
from .space import ParameterSpace
from .training import ClassifierBundle, SvmConfig, generate_training_sets, feature_wavelengths, reconstruct
from .workers import SimulationCache, map_jobs

__all__ = [
    "METHODS",
    "CaseRecord",
    "BenchReport",
    "run_benchmark",
    "SweepGrid",
    "SweepRow",
    "SweepTable",
    "kernel_sweep",
    "case_seed",
]

log = logging.getLogger(__name__)

METHODS = ("svm_lm", "lm_only")


def case_seed(*keys: int) -> int:
    """Stable 63-bit seed derived from integer keys."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(2, np.uint64)[0] >> np.uint64(1))


@dataclass
class CaseRecord:
    case: int
    method: str
    true: dict
    init: dict
    extracted: dict
    abs_errors: dict
    converged: bool
    iterations: int
    residual_norm: float
    wall_time: float
    svm_time: float = 0.0
    lm_time: float = 0.0
    true_labels: dict = field(default_factory=dict)
    mapped_labels: dict | None = None
    mapped_subranges: dict | None = None
    message: str = ""

    def max_error(self) -> float:
        v = list(self.abs_errors.values())
        return max(v) if v else math.nan


@dataclass
class BenchReport:
    names: list
    records: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    divergence_threshold: float = 10.0

    def by_method(self, method: str) -> list[CaseRecord]:
        return [r for r in self.records if r.method == method]

    def diverged(self, r: CaseRecord) -> bool:
        err = r.max_error()
        return (not r.converged) or not (err <= self.divergence_threshold)

    def classification_accuracy(self) -> dict:
        recs = [r for r in self.by_method("svm_lm") if r.mapped_labels is not None]
        if not recs:
            return {}
        return {n: sum(r.mapped_labels[n] == r.true_labels[n] for r in recs) / len(recs) for n in self.names}

    def paired(self) -> list[tuple[CaseRecord, CaseRecord]]:
        """(svm_lm, lm_only) pairs on the same case where both runs reached the true optimum.

        "True optimum" means converged and within the divergence threshold of the
        true parameters. The agreement between the two extracted vectors is then
        an outcome to report, not part of the selection.
        """
        lm = {r.case: r for r in self.by_method("lm_only")}
        out = []
        for s in self.by_method("svm_lm"):
            o = lm.get(s.case)
            if o is not None and not self.diverged(s) and not self.diverged(o):
                out.append((s, o))
        return out

    def aggregates(self) -> dict:
        """Summary statistics, recomputed from the records on every call."""
        agg: dict = {"n_cases": len({r.case for r in self.records})}
        for method in METHODS:
            recs = self.by_method(method)
            if not recs:
                continue
            errs = {n: [r.abs_errors[n] for r in recs] for n in self.names}
            agg[method] = {
                "n": len(recs),
                "converged": sum(r.converged for r in recs),
                "convergence_rate": sum(r.converged for r in recs) / len(recs),
                "diverged": sum(self.diverged(r) for r in recs),
                "median_abs_error": {n: float(np.median(v)) for n, v in errs.items()},
                "max_abs_error": {n: float(np.max(v)) for n, v in errs.items()},
                "median_wall_time": float(np.median([r.wall_time for r in recs])),
                "median_iterations": float(np.median([r.iterations for r in recs])),
            }
        acc = self.classification_accuracy()
        if acc:
            agg["classification_accuracy"] = acc
        pairs = self.paired()
        if pairs:
            agg["both_converged"] = {
                "n": len(pairs),
                "max_param_difference": float(max(abs(s.extracted[n] - o.extracted[n])
                                                  for s, o in pairs for n in self.names)),
                "median_wall_time_svm_lm": float(np.median([s.wall_time for s, _ in pairs])),
                "median_wall_time_lm_only": float(np.median([o.wall_time for _, o in pairs])),
                "median_iterations_svm_lm": float(np.median([s.iterations for s, _ in pairs])),
                "median_iterations_lm_only": float(np.median([o.iterations for _, o in pairs])),
            }
        return agg

    def columns(self) -> list[str]:
        n = self.names
        return (["case", "method"] + [f"true_{x}" for x in n] + [f"init_{x}" for x in n]
                + [f"extracted_{x}" for x in n] + [f"abs_err_{x}" for x in n]
                + [f"mapped_{x}" for x in n]
                + ["converged", "iterations", "residual_norm", "wall_time_s", "svm_time_s", "lm_time_s", "message"])

    def rows(self) -> list[list]:
        out = []
        for r in self.records:
            mapped = [r.mapped_labels[x] if r.mapped_labels else "" for x in self.names]
            out.append([r.case, r.method] + [r.true[x] for x in self.names] + [r.init[x] for x in self.names]
                       + [r.extracted[x] for x in self.names] + [r.abs_errors[x] for x in self.names]
                       + mapped + [int(r.converged), r.iterations, r.residual_norm, r.wall_time,
                                   r.svm_time, r.lm_time, r.message])
        return out

    def write(self, directory, stem: str = "svm_vs_lm") -> list[Path]:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        tsv = d / f"{stem}.tsv"
        with open(tsv, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            w.writerow(self.columns())
            for row in self.rows():
                w.writerow([_cell(v) for v in row])
        summary = d / f"{stem}.summary.json"
        with open(summary, "w", encoding="utf-8", newline="\n") as fh:
            json.dump({"meta": self.meta, "aggregates": self.aggregates()}, fh, indent=1, sort_keys=True)
            fh.write("\n")
        return [tsv, summary]


def _cell(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return v


def _measured(fm: ForwardModel, true: dict, error: ErrorSpec, case: int) -> Signature:
    sig = fm.signature(true)
    return inject_errors(sig, error.with_seed(case_seed(error.seed, case)))


def _bench_case(args) -> list[CaseRecord]:
    (case, true, methods, space, structure, bundle, meas_fm, fit_fm, fit_inc, lm_config, error,
     lm_only_init) = args
    names = space.names
    true_labels = {n: space[n].subrange_index(true[n]) for n in names}
    out = []
    try:
        measured = _measured(meas_fm, true, error, case)
    except Exception as exc:
        msg = f"simulation failed: {type(exc).__name__}: {exc}"
        return [_failed(case, m, true, true_labels, names, msg) for m in methods]
    for method in methods:
        try:
            if method == "svm_lm":
                rec = reconstruct(measured, structure, space, bundle, fit_inc, lm_config, model=fit_fm)
                fit, init = rec.fit, rec.init
                mapped = {m.name: m.label for m in rec.mapping}
                subr = {m.name: list(m.subrange) for m in rec.mapping}
                svm_t, lm_t = rec.svm_time, rec.lm_time
            else:
                init = space.medians if lm_only_init == "median" else space.lows
                fit = lm_fit(measured, structure, init, space.bounds, fit_inc, lm_config, model=fit_fm)
                mapped = subr = None
                svm_t, lm_t = 0.0, fit.wall_time
            out.append(CaseRecord(
                case, method, dict(true), dict(init), dict(fit.params),
                {n: abs(fit.params[n] - true[n]) for n in names}, fit.converged, fit.iterations,
                fit.residual_norm, svm_t + lm_t, svm_t, lm_t, true_labels, mapped, subr, fit.message))
        except Exception as exc:
            out.append(_failed(case, method, true, true_labels, names, f"{type(exc).__name__}: {exc}"))
    return out


def _failed(case, method, true, true_labels, names, msg) -> CaseRecord:
    nan = {n: math.nan for n in names}
    return CaseRecord(case, method, dict(true), dict(nan), dict(nan), dict(nan), False, 0, math.nan,
                      0.0, true_labels=true_labels, message=msg)


def run_benchmark(space: ParameterSpace, structure: StructureModel, incidence: IncidenceConfig,
                  bundle: ClassifierBundle | None, n_cases: int, error: ErrorSpec,
                  methods: Sequence[str] = METHODS, seed: int = 0, lm_config: LmConfig = LmConfig(),
                  fit_wavelengths=None, lm_only_init: str = "median",
                  materials: MaterialLibrary | None = None, workers: int | None = None) -> BenchReport:
    """Draw n_cases true vectors, synthesize noisy signatures on the incidence
    grid, and fit each with every requested method (same signature for all)."""
    methods = list(methods)
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise ValueError(f"unknown methods {bad}; expected {METHODS}")
    if "svm_lm" in methods and bundle is None:
        raise ValueError("svm_lm requires a trained classifier bundle")
    if lm_only_init not in ("median", "low"):
        raise ValueError("lm_only_init must be 'median' or 'low'")
    space.check_structure(structure.parameters)
    materials = materials or MaterialLibrary()
    fit_inc = incidence if fit_wavelengths is None else incidence.with_wavelengths(fit_wavelengths)
    meas_fm = ForwardModel(structure, incidence, materials)
    fit_fm = ForwardModel(structure, fit_inc, materials)
    points = space.random_points(n_cases, [int(seed), 0])
    jobs = [(c, dict(zip(space.names, (float(v) for v in points[c]))), methods, space, structure, bundle,
             meas_fm, fit_fm, fit_inc, lm_config, error, lm_only_init) for c in range(n_cases)]
    records = [r for recs in map_jobs(_bench_case, jobs, workers) for r in recs]
    meta = {"n_cases": n_cases, "methods": methods, "seed": int(seed), "error": asdict(error),
            "lm_config": lm_config.to_dict(), "fit_wavelengths": [float(w) for w in fit_inc.wavelengths],
            "structure_hash": structure.hash(), "lm_only_init": lm_only_init}
    return BenchReport(space.names, records, meta)


@dataclass(frozen=True)
class SweepGrid:
    kernels: tuple
    k_points: tuple = (7,)
    samples_per_subrange: tuple = (None,)
    errors: tuple = ((0.0, 0.0),)
    test_seeds: tuple = (0,)

    def __post_init__(self):
        for name in ("kernels", "k_points", "samples_per_subrange", "errors", "test_seeds"):
            v = tuple(getattr(self, name))
            if not v:
                raise ValueError(f"sweep grid axis {name} is empty")
            object.__setattr__(self, name, v)
        object.__setattr__(self, "errors", tuple((float(a), float(b)) for a, b in self.errors))

    @property
    def n_cells(self) -> int:
        return (len(self.kernels) * len(self.k_points) * len(self.samples_per_subrange)
                * len(self.errors) * len(self.test_seeds))


@dataclass
class SweepRow:
    parameter: str
    kernel: str
    controlling_factor: float
    rbf_squared: bool
    k_points: int
    pairs_per_class: int
    random_magnitude: float
    offset_magnitude: float
    test_seed: int
    n_test: int
    accuracy: float
    converged: bool
    train_time: float


@dataclass
class SweepTable:
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    COLUMNS = [f for f in SweepRow.__dataclass_fields__]

    def select(self, **match) -> list[SweepRow]:
        return [r for r in self.rows if all(getattr(r, k) == v for k, v in match.items())]

    def mean_accuracy(self, **match) -> float:
        rows = self.select(**match)
        if not rows:
            raise ValueError(f"no sweep rows match {match}")
        return float(np.mean([r.accuracy for r in rows]))

    def write(self, directory, stem: str) -> list[Path]:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        tsv = d / f"{stem}.tsv"
        with open(tsv, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            w.writerow(self.COLUMNS)
            for r in self.rows:
                w.writerow([_cell(getattr(r, c)) for c in self.COLUMNS])
        summary = d / f"{stem}.summary.json"
        with open(summary, "w", encoding="utf-8", newline="\n") as fh:
            json.dump({"meta": self.meta, "n_rows": len(self.rows)}, fh, indent=1, sort_keys=True)
            fh.write("\n")
        return [tsv, summary]


def kernel_sweep(space: ParameterSpace, structure: StructureModel, incidence: IncidenceConfig,
                 grid: SweepGrid, param_index: int = 0, n_test: int = 100, training_seed: int = 0,
                 svm_config: SvmConfig = SvmConfig(), materials: MaterialLibrary | None = None,
                 cache: SimulationCache | None = None, workers: int | None = None) -> SweepTable:
    """Accuracy of one parameter's classifier per grid cell, on fresh test signatures.

    Test vectors for a seed are drawn uniformly in the rough ranges, simulated on
    the full incidence grid, contaminated per the cell's error magnitudes, then
    subsampled. Training sets are always clean. A kernel whose SMO runs out of
    iterations is still evaluated, with ``converged`` False.
    """
    space.check_structure(structure.parameters)
    if cache is None:
        cache = SimulationCache(ForwardModel(structure, incidence, materials), workers)
    p = space[param_index]
    wl = incidence.wavelengths
    tests = {}
    for ts in grid.test_seeds:
        pts = space.random_points(n_test, [int(ts), 1])
        m = cache.mueller(pts, space.names, wl)
        tests[ts] = ([Signature(wl, mi) for mi in m], space.labels_of(pts[:, param_index], param_index))

    rows = []
    for K in grid.samples_per_subrange:
        sp = space if K is None else space.with_samples(samples_per_subrange=K)
        for k in grid.k_points:
            ts = generate_training_sets(sp, param_index, structure, incidence, k, training_seed, cache=cache)
            fwl = feature_wavelengths(incidence, k)
            for kernel in grid.kernels:
                t0 = time.perf_counter()
                model = ovo_train(ts, kernel, svm_config.C, svm_config.tol, dict(enumerate(p.subranges())),
                                  svm_config.max_iter, allow_unconverged=True)
                train_time = time.perf_counter() - t0
                for (rm, om) in grid.errors:
                    for tseed in grid.test_seeds:
                        sigs, labels = tests[tseed]
                        X = np.array([
                            inject_errors(s, ErrorSpec(rm, om, case_seed(tseed, 2, i))).at(fwl).elements.ravel()
                            for i, s in enumerate(sigs)])
                        acc = classification_accuracy(model, X, labels)
                        rows.append(SweepRow(p.name, kernel.kind, float(kernel.controlling_factor),
                                             kernel.rbf_squared, int(k), len(ts) // p.n_subranges, rm, om,
                                             int(tseed), n_test, acc, model.converged, train_time))
                log.info("sweep %s k=%d pairs=%d: %s", kernel, k, len(ts) // p.n_subranges,
                         [round(r.accuracy, 3) for r in rows[-len(grid.errors) * len(grid.test_seeds):]])
    meta = {"parameter": p.name, "n_test": n_test, "training_seed": int(training_seed),
            "design": space.design, "structure_hash": structure.hash(),
            "svm": {"C": svm_config.C, "tol": svm_config.tol}}
    return SweepTable(rows, meta)
