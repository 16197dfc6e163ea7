"""Box-constrained Levenberg-Marquardt fitting with finite-difference Jacobians.

Each iteration solves (J^T J + mu diag(J^T J)) delta = -J^T r. A trial step that
lowers the cost is accepted (mu shrinks); otherwise it is rejected (mu grows)
and retried with the same Jacobian. Accepted iterates are projected onto the
bounds. The cost is the squared residual norm.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .forward.mueller import Signature
from .forward.simulate import ForwardModel
from .forward.structure import IncidenceConfig, StructureModel
from .materials import MaterialLibrary

__all__ = [
    "LmConfig",
    "TraceEntry",
    "FitResult",
    "finite_diff_jacobian",
    "lm_minimize",
    "residuals",
    "lm_fit",
    "format_fit_report",
    "write_fit_report",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LmConfig:
    max_iterations: int = 200
    cost_tolerance: float = 1e-10
    step_tolerance: float = 1e-8
    initial_damping: float = 1e-3
    damping_up: float = 10.0
    damping_down: float = 0.1
    fd_step: float = 1e-6
    max_damping: float = 1e16

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        for name in ("cost_tolerance", "step_tolerance", "initial_damping", "fd_step", "max_damping"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.damping_up > 1:
            raise ValueError("damping_up must exceed 1")
        if not 0 < self.damping_down < 1:
            raise ValueError("damping_down must lie in (0, 1)")

    @classmethod
    def from_dict(cls, d: Mapping | None) -> "LmConfig":
        return cls(**dict(d or {}))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TraceEntry:
    iteration: int
    cost: float
    damping: float
    accepted: bool
    params: tuple


@dataclass
class FitResult:
    params: dict
    residual_norm: float
    iterations: int
    converged: bool
    wall_time: float
    trace: list = field(default_factory=list)
    message: str = ""
    n_evaluations: int = 0

    @property
    def cost(self) -> float:
        return self.residual_norm ** 2

    def to_dict(self, include_trace: bool = True) -> dict:
        d = {
            "params": {k: float(v) for k, v in self.params.items()},
            "residual_norm": float(self.residual_norm),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "wall_time": float(self.wall_time),
            "message": self.message,
            "n_evaluations": int(self.n_evaluations),
        }
        if include_trace:
            d["trace"] = [asdict(t) for t in self.trace]
        return d


def _steps(x, lower, upper, fd_step):
    h = np.maximum(fd_step * np.abs(x), fd_step * (upper - lower))
    # flip direction when the forward step would leave the box
    return np.where(x + h > upper, -h, h)


def finite_diff_jacobian(residual_fn: Callable, params, fd_step: float, bounds,
                         r0=None, batch_fn: Callable | None = None) -> np.ndarray:
    """Forward-difference Jacobian (n_residuals x n_params).

    ``bounds`` is a (lower, upper) pair of arrays. ``batch_fn``, if given, maps a
    list of parameter vectors to a list of residual vectors in one call.
    """
    x = np.asarray(params, dtype=float)
    lower, upper = (np.asarray(b, dtype=float) for b in bounds)
    if r0 is None:
        r0 = np.asarray(residual_fn(x), dtype=float)
    h = _steps(x, lower, upper, fd_step)
    points = []
    for j in range(x.size):
        xp = x.copy()
        xp[j] += h[j]
        points.append(xp)
    if batch_fn is not None:
        rs = batch_fn(points)
    else:
        rs = [residual_fn(p) for p in points]
    J = np.empty((r0.size, x.size))
    for j, rj in enumerate(rs):
        rj = np.asarray(rj, dtype=float)
        if not np.all(np.isfinite(rj)):
            raise FloatingPointError(f"non-finite residuals at perturbed parameter {j}")
        J[:, j] = (rj - r0) / h[j]
    return J


def lm_minimize(residual_fn: Callable, x0, lower, upper, config: LmConfig = LmConfig(),
                names: Sequence[str] | None = None, batch_fn: Callable | None = None) -> FitResult:
    """Generic bounded LM on a vector residual function."""
    t0 = time.perf_counter()
    x = np.asarray(x0, dtype=float).copy()
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    names = list(names) if names is not None else [f"p{i}" for i in range(x.size)]
    if np.any(lower >= upper):
        raise ValueError("every lower bound must be below its upper bound")
    if np.any(x < lower) or np.any(x > upper):
        raise ValueError("initial point lies outside the bounds")

    n_eval = 1
    r = np.asarray(residual_fn(x), dtype=float)
    if not np.all(np.isfinite(r)):
        raise FloatingPointError("non-finite residuals at the initial point")
    cost = float(r @ r)
    mu = config.initial_damping
    trace = [TraceEntry(0, cost, mu, True, tuple(x.tolist()))]
    converged = False
    message = "iteration limit reached"
    need_jac = True
    it = 0
    while it < config.max_iterations:
        if cost <= config.cost_tolerance:
            converged, message = True, "cost tolerance reached"
            break
        if need_jac:
            J = finite_diff_jacobian(residual_fn, x, config.fd_step, (lower, upper), r0=r, batch_fn=batch_fn)
            n_eval += x.size
            A = J.T @ J
            g = J.T @ r
            D = np.diag(A).copy()
            D = np.maximum(D, 1e-30 * max(float(D.max()), 1e-300))
            need_jac = False
        it += 1
        try:
            delta = np.linalg.solve(A + mu * np.diag(D), -g)
            ok = np.all(np.isfinite(delta))
        except np.linalg.LinAlgError:
            ok = False
        if not ok:
            mu *= config.damping_up
            trace.append(TraceEntry(it, cost, mu, False, tuple(x.tolist())))
            if mu > config.max_damping:
                message = "singular normal equations"
                break
            continue
        x_new = np.clip(x + delta, lower, upper)
        step = np.linalg.norm(x_new - x)
        if step <= config.step_tolerance * (np.linalg.norm(x) + config.step_tolerance):
            converged, message = True, "step tolerance reached"
            break
        r_new = np.asarray(residual_fn(x_new), dtype=float)
        n_eval += 1
        c_new = float(r_new @ r_new) if np.all(np.isfinite(r_new)) else np.inf
        if c_new < cost:
            rel = (cost - c_new) / cost
            x, r, cost = x_new, r_new, c_new
            mu *= config.damping_down
            need_jac = True
            trace.append(TraceEntry(it, cost, mu, True, tuple(x.tolist())))
            if rel <= config.cost_tolerance:
                converged, message = True, "relative cost reduction below tolerance"
                break
        else:
            mu *= config.damping_up
            trace.append(TraceEntry(it, cost, mu, False, tuple(x_new.tolist())))
            if mu > config.max_damping:
                message = "damping exceeded its limit"
                break
    else:
        if cost <= config.cost_tolerance:
            converged, message = True, "cost tolerance reached"

    return FitResult(
        params=dict(zip(names, (float(v) for v in x))),
        residual_norm=float(np.sqrt(cost)),
        iterations=it,
        converged=converged,
        wall_time=time.perf_counter() - t0,
        trace=trace,
        message=message,
        n_evaluations=n_eval,
    )


def _target_elements(target: Signature, wavelengths) -> np.ndarray:
    return target.at(wavelengths).elements


def residuals(target: Signature, structure: StructureModel, params: Mapping[str, float],
              incidence: IncidenceConfig, materials: MaterialLibrary | None = None,
              model: ForwardModel | None = None) -> np.ndarray:
    """Simulated minus target elements over the incidence wavelengths.

    Layout: wavelength-major, then m12, m13, ..., m44 within each wavelength.
    """
    model = model or ForwardModel(structure, incidence, materials)
    wl = incidence.wavelengths
    sim = model.mueller([params], wl)[0].reshape(wl.size, 16)[:, 1:]
    return (sim - _target_elements(target, wl)).ravel()


def lm_fit(target: Signature, structure: StructureModel, init: Mapping[str, float],
           bounds: Mapping[str, tuple], incidence: IncidenceConfig, config: LmConfig = LmConfig(),
           materials: MaterialLibrary | None = None, model: ForwardModel | None = None) -> FitResult:
    """Fit ``structure`` parameters so its signature matches ``target`` on the incidence grid.

    Parameters not listed in ``init`` are a usage error; every fitted parameter
    needs a (low, high) entry in ``bounds``.
    """
    names = list(structure.parameters)
    missing = [n for n in names if n not in init or n not in bounds]
    if missing:
        raise KeyError(f"missing init or bounds for {missing}")
    model = model or ForwardModel(structure, incidence, materials)
    wl = incidence.wavelengths
    tgt = _target_elements(target, wl).ravel()

    def batch(points):
        m = model.mueller([dict(zip(names, p)) for p in points], wl)
        return [mi.reshape(wl.size, 16)[:, 1:].ravel() - tgt for mi in m]

    def fn(p):
        return batch([p])[0]

    lower = [bounds[n][0] for n in names]
    upper = [bounds[n][1] for n in names]
    x0 = [init[n] for n in names]
    res = lm_minimize(fn, x0, lower, upper, config, names, batch_fn=batch)
    log.debug("lm_fit %s after %d iterations: %s", res.message, res.iterations, res.params)
    return res


def format_fit_report(result: FitResult, extra: Mapping | None = None) -> str:
    """Human-readable text report: header block, then the per-iteration trace."""
    lines = ["# scatterlm fit report", "format-version: 1"]
    for k, v in (extra or {}).items():
        lines.append(f"{k}: {v}")
    for k, v in result.params.items():
        lines.append(f"param {k}: {v:.17g}")
    lines += [
        f"residual_norm: {result.residual_norm:.17g}",
        f"iterations: {result.iterations}",
        f"converged: {str(result.converged).lower()}",
        f"message: {result.message}",
        f"wall_time_s: {result.wall_time:.6f}",
        f"evaluations: {result.n_evaluations}",
        "",
        "iteration\taccepted\tcost\tdamping\t" + "\t".join(result.params),
    ]
    for t in result.trace:
        lines.append(f"{t.iteration}\t{int(t.accepted)}\t{t.cost:.17g}\t{t.damping:.6g}\t"
                     + "\t".join(f"{v:.17g}" for v in t.params))
    return "\n".join(lines) + "\n"


def write_fit_report(result: FitResult, path, extra: Mapping | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_fit_report(result, extra))
