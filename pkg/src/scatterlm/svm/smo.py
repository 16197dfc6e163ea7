"""Binary soft-margin SVM trained by sequential minimal optimization.

The dual problem

    min_a  1/2 a^T Q a - sum(a),   Q_ij = y_i y_j k(x_i, x_j)
    s.t.   0 <= a_i <= C,  y^T a = 0

is solved two multipliers at a time, picking the maximal-violating pair with
second-order information (the LIBSVM working-set rule). Training stops when the
maximal KKT violation m(a) - M(a) falls below ``tol``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .kernels import KernelSpec, gram

__all__ = [
    "BinarySvmModel",
    "DualSolution",
    "SmoConvergenceError",
    "solve_dual",
    "smo_train",
    "decision",
    "kkt_violations",
    "dual_objective",
]

log = logging.getLogger(__name__)

TAU = 1e-12


class SmoConvergenceError(RuntimeError):
    """Iteration budget exhausted before the KKT tolerance was met.

    ``model`` holds the last iterate so callers can still inspect or use it.
    """

    def __init__(self, message, model=None, solution=None):
        super().__init__(message)
        self.model = model
        self.solution = solution


@dataclass
class DualSolution:
    alpha: np.ndarray
    bias: float
    gradient: np.ndarray
    iterations: int
    converged: bool
    gap: float


def solve_dual(K: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-3,
               max_iter: int | None = None) -> DualSolution:
    """SMO on a precomputed kernel matrix ``K`` with labels ``y`` in {-1, +1}."""
    y = np.asarray(y, dtype=float)
    n = y.size
    if K.shape != (n, n):
        raise ValueError("kernel matrix shape does not match labels")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise ValueError("both classes must be present")
    if C <= 0 or tol <= 0:
        raise ValueError("C and tol must be positive")
    if max_iter is None:
        max_iter = max(1_000_000, 100 * n)

    diag = np.diag(K).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)
    pos = y > 0
    it = 0
    gap = np.inf
    while it < max_iter:
        # u_t = -y_t G_t; I_up may still increase y_t a_t, I_low may decrease it
        u = -y * G
        up = np.where(pos, alpha < C, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < C)
        u_up = np.where(up, u, -np.inf)
        i = int(np.argmax(u_up))
        g_max = u_up[i]
        g_min = np.min(np.where(low, u, np.inf))
        gap = g_max - g_min
        if gap < tol:
            break
        Ki = K[i]
        a = diag[i] + diag - 2.0 * Ki
        a = np.where(a > 0, a, TAU)
        b = g_max - u
        cand = low & (b > 0)
        if not np.any(cand):
            break
        obj = np.where(cand, -(b * b) / a, np.inf)
        j = int(np.argmin(obj))

        ai_old, aj_old = alpha[i], alpha[j]
        yi, yj = y[i], y[j]
        quad = a[j]
        if yi != yj:
            delta = (-G[i] - G[j]) / quad
            diff = ai_old - aj_old
            ai, aj = ai_old + delta, aj_old + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            elif aj > C:
                aj, ai = C, C + diff
        else:
            delta = (G[i] - G[j]) / quad
            total = ai_old + aj_old
            ai, aj = ai_old - delta, aj_old + delta
            if total > C:
                if ai > C:
                    ai, aj = C, total - C
            elif aj < 0:
                aj, ai = 0.0, total
            if total > C:
                if aj > C:
                    aj, ai = C, total - C
            elif ai < 0:
                ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        G += y * (yi * (ai - ai_old) * Ki + yj * (aj - aj_old) * K[j])
        it += 1

    converged = gap < tol
    bias = -_rho(alpha, y, G, C)
    return DualSolution(alpha, bias, G, it, converged, float(gap))


def _rho(alpha, y, G, C):
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if np.any(free):
        return float(np.mean(yG[free]))
    at_upper = alpha >= C
    at_lower = alpha <= 0
    ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
    lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
    ub = np.min(yG[ub_mask]) if np.any(ub_mask) else np.inf
    lb = np.max(yG[lb_mask]) if np.any(lb_mask) else -np.inf
    if not np.isfinite(ub):
        return float(lb)
    if not np.isfinite(lb):
        return float(ub)
    return float((ub + lb) / 2)


def dual_objective(K, y, alpha) -> float:
    """1/2 a^T Q a - sum(a) for the minimization form of the dual."""
    ya = np.asarray(y) * np.asarray(alpha)
    return float(0.5 * ya @ K @ ya - np.sum(alpha))


def kkt_violations(K, y, alpha, bias, C) -> np.ndarray:
    """Per-point violation of the soft-margin KKT conditions (0 when satisfied).

    a = 0 needs y f >= 1, 0 < a < C needs y f = 1, a = C needs y f <= 1,
    with f(x_i) = sum_j a_j y_j K_ij + bias.
    """
    y = np.asarray(y, dtype=float)
    margin = y * (K @ (alpha * y) + bias) - 1.0
    viol = np.zeros_like(margin)
    lower = alpha <= 0
    upper = alpha >= C
    free = ~(lower | upper)
    viol[lower] = np.maximum(0.0, -margin[lower])
    viol[upper] = np.maximum(0.0, margin[upper])
    viol[free] = np.abs(margin[free])
    return viol


@dataclass(frozen=True)
class BinarySvmModel:
    """Support vectors with their lambda_i * y_i weights and bias."""

    support_vectors: np.ndarray
    alpha_y: np.ndarray
    bias: float
    kernel: KernelSpec
    C: float = 10.0
    iterations: int = 0
    converged: bool = True
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        sv = np.atleast_2d(np.asarray(self.support_vectors, dtype=float))
        ay = np.asarray(self.alpha_y, dtype=float).ravel()
        if sv.shape[0] != ay.size:
            raise ValueError("support vector count does not match alpha_y length")
        object.__setattr__(self, "support_vectors", sv)
        object.__setattr__(self, "alpha_y", ay)
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def n_features(self) -> int:
        return self.support_vectors.shape[1]

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise ValueError(f"feature length {X.shape[1]} does not match model ({self.n_features})")
        if self.alpha_y.size == 0:
            return np.full(X.shape[0], self.bias)
        return gram(self.kernel, X, self.support_vectors) @ self.alpha_y + self.bias

    def predict(self, X) -> np.ndarray:
        """Labels in {-1, +1}; a decision value of exactly 0 maps to +1."""
        return np.where(self.decision_function(X) >= 0, 1, -1)

    def scaled(self, factor: float) -> "BinarySvmModel":
        return BinarySvmModel(self.support_vectors, self.alpha_y * factor, self.bias * factor,
                              self.kernel, self.C, self.iterations, self.converged)


def decision(model: BinarySvmModel, x) -> int:
    return int(model.predict(np.asarray(x, dtype=float)[None, :])[0])


def smo_train(X, y, kernel: KernelSpec, C: float = 10.0, tol: float = 1e-3,
              max_iter: int | None = None, K: np.ndarray | None = None) -> BinarySvmModel:
    """Train a binary SVM; only points with lambda_i > 0 are kept as support vectors.

    Raises SmoConvergenceError (carrying the partial model) if ``max_iter`` runs out.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.size:
        raise ValueError("feature/label count mismatch")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("binary labels must be -1 or +1")
    if K is None:
        K = gram(kernel, X, X)
    sol = solve_dual(K, y, C, tol, max_iter)
    keep = sol.alpha > 0
    model = BinarySvmModel(X[keep], (sol.alpha * y)[keep], sol.bias, kernel, C,
                           sol.iterations, sol.converged)
    if not sol.converged:
        raise SmoConvergenceError(
            f"SMO stopped after {sol.iterations} iterations with KKT gap {sol.gap:.3g} > tol {tol}",
            model=model, solution=sol,
        )
    log.debug("SMO converged: %d iterations, %d SVs", sol.iterations, keep.sum())
    return model
