"""Rigorous coupled-wave analysis for 1D lamellar stacks in planar mounting.

Conventions: time dependence exp(-i w t); z points down into the structure;
lengths are scaled by the vacuum wavenumber k0. TE solves for E_y, TM for H_y.
The TM Toeplitz products use the inverse rule (Li 1996) for the normal
component of D. Layers are joined by a bottom-up scattering-matrix recursion
that only ever multiplies by exp(-q d) with Re(q) >= 0, so thick or strongly
evanescent layers cannot overflow.

Every array carries a leading batch axis B (independent wavelength/structure
combinations); harmonics -N..N form the trailing axis of size n = 2N + 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["RcwaError", "StackArrays", "solve_stack", "fourier_coefficients", "toeplitz_stack"]

POLARIZATIONS = ("TE", "TM")


class RcwaError(ArithmeticError):
    """The modal solution produced non-finite values."""


@dataclass
class StackArrays:
    """Batched description of a lamellar stack.

    kx: (B, n) normalized tangential wavenumbers of the retained orders.
    eps_ambient, eps_substrate: (B,) complex permittivities of the half-spaces.
    eps_line, eps_groove, fill, thickness: (B, L) per-layer values, top to bottom;
    ``thickness`` is already multiplied by k0.
    """

    kx: np.ndarray
    eps_ambient: np.ndarray
    eps_substrate: np.ndarray
    eps_line: np.ndarray
    eps_groove: np.ndarray
    fill: np.ndarray
    thickness: np.ndarray

    @property
    def order(self) -> int:
        return (self.kx.shape[-1] - 1) // 2

    @property
    def n_layers(self) -> int:
        return self.fill.shape[-1]


def fourier_coefficients(value_line, value_groove, fill, order):
    """Coefficients h = -2N..2N of a period with a centred line of fractional width ``fill``."""
    h = np.arange(-2 * order, 2 * order + 1)
    value_line = np.asarray(value_line)[..., None]
    value_groove = np.asarray(value_groove)[..., None]
    f = np.asarray(fill, dtype=float)[..., None]
    return value_groove * (h == 0) + (value_line - value_groove) * f * np.sinc(h * f)


def toeplitz_stack(coeffs, order):
    """Toeplitz matrices T[m, n] = c[m - n] from coefficient arrays (..., 4N+1)."""
    idx = np.arange(2 * order + 1)
    return coeffs[..., idx[:, None] - idx[None, :] + 2 * order]


def _kz(eps, kx):
    """Normal wavenumber in a homogeneous half-space, branch Im >= 0 (outgoing / decaying)."""
    kz = np.sqrt(eps[..., None] - kx.astype(complex) ** 2)
    return np.where(kz.imag < 0, -kz, kz)


def _layer_modes(stack: StackArrays, pol: str):
    """Eigen-modes of every layer: W (B,L,n,n), V (B,L,n,n), q (B,L,n)."""
    N = stack.order
    n = 2 * N + 1
    eye = np.eye(n)
    E = toeplitz_stack(fourier_coefficients(stack.eps_line, stack.eps_groove, stack.fill, N), N)
    kx = stack.kx[:, None, :]
    if pol == "TE":
        omega2 = -E + eye * kx[..., None, :] ** 2
        lam, W = np.linalg.eig(omega2)
        q = np.sqrt(lam)
        V = W * q[..., None, :]
    else:
        A = toeplitz_stack(
            fourier_coefficients(1.0 / stack.eps_line, 1.0 / stack.eps_groove, stack.fill, N), N
        )
        Einv = np.linalg.inv(E)
        omega2 = np.linalg.solve(A, kx[..., :, None] * Einv * kx[..., None, :] - eye)
        lam, W = np.linalg.eig(omega2)
        q = np.sqrt(lam)
        V = A @ (W * q[..., None, :])
    return W, V, q


def _half_space(eps, kx, pol):
    """(V diagonal, kz) for a homogeneous half-space; W is the identity."""
    kz = _kz(eps, kx)
    q = -1j * kz
    v = q if pol == "TE" else q / eps[:, None]
    return v, kz


def _interface(Wa, Va, Wb, Vb, Rb):
    """Match medium a (above) to medium b (below) whose top sees reflection Rb.

    Returns (Ra, Tab): reflection of downward waves in a at the interface, and the
    map from those waves to the downward amplitudes transmitted into b.
    """
    n = Rb.shape[-1]
    eye = np.eye(n)
    lhs = np.concatenate(
        [np.concatenate([Wa, -Wb @ (eye + Rb)], axis=-1),
         np.concatenate([Va, Vb @ (eye - Rb)], axis=-1)],
        axis=-2,
    )
    rhs = np.concatenate([-Wa, Va], axis=-2)
    sol = np.linalg.solve(lhs, rhs)
    return sol[..., :n, :], sol[..., n:, :]


def solve_stack(stack: StackArrays, pol: str, transmission: bool = False):
    """Reflection (and optionally transmission) matrices of the stack.

    Returns a dict with ``R`` (B,n,n): ambient-side reflected amplitudes per
    incident order, ``kz_ambient`` and ``kz_substrate`` (B,n); plus ``T`` (B,n,n)
    when ``transmission`` is set. For TE the amplitudes are of E_y, for TM of H_y.
    """
    if pol not in POLARIZATIONS:
        raise ValueError(f"polarization must be one of {POLARIZATIONS}")
    B, n = stack.kx.shape
    eye = np.broadcast_to(np.eye(n, dtype=complex), (B, n, n))
    v_sub, kz_sub = _half_space(stack.eps_substrate, stack.kx, pol)
    v_amb, kz_amb = _half_space(stack.eps_ambient, stack.kx, pol)

    R = np.zeros((B, n, n), dtype=complex)
    T = eye.copy() if transmission else None
    Wb, Vb = eye, eye * v_sub[:, None, :]
    if stack.n_layers:
        W, V, q = _layer_modes(stack, pol)
        for layer in range(stack.n_layers - 1, -1, -1):
            Wa, Va = W[:, layer], V[:, layer]
            Ra, Tab = _interface(Wa, Va, Wb, Vb, R)
            X = np.exp(-q[:, layer] * stack.thickness[:, layer, None])
            R = X[:, :, None] * Ra * X[:, None, :]
            if transmission:
                T = (T @ Tab) * X[:, None, :]
            Wb, Vb = Wa, Va
    R, Tab = _interface(eye, eye * v_amb[:, None, :], Wb, Vb, R)
    out = {"R": R, "kz_ambient": kz_amb, "kz_substrate": kz_sub}
    if transmission:
        out["T"] = T @ Tab
    if not np.all(np.isfinite(R)) or (transmission and not np.all(np.isfinite(out["T"]))):
        raise RcwaError("non-finite values in the modal solution")
    return out


def efficiencies(stack: StackArrays, pol: str, incident_order: int | None = None):
    """Diffraction efficiencies (reflected, transmitted), each (B, n), for one incident order."""
    N = stack.order
    c = N if incident_order is None else incident_order + N
    sol = solve_stack(stack, pol, transmission=True)
    r = sol["R"][:, :, c]
    t = sol["T"][:, :, c]
    kz_a, kz_s = sol["kz_ambient"], sol["kz_substrate"]
    if pol == "TE":
        norm = kz_a[:, c].real
        ref = np.abs(r) ** 2 * kz_a.real / norm[:, None]
        tra = np.abs(t) ** 2 * kz_s.real / norm[:, None]
    else:
        ea, es = stack.eps_ambient[:, None], stack.eps_substrate[:, None]
        norm = (kz_a[:, c, None] / ea).real
        ref = np.abs(r) ** 2 * (kz_a / ea).real / norm
        tra = np.abs(t) ** 2 * (kz_s / es).real / norm
    return ref, tra
