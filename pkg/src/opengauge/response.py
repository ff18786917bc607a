"""Nambu Green's functions with a one-body-loss width and gauge checks.

Notation: ``a = omega + i gn/2`` with ``gn = gamma * n``, ``E^2 = eps^2 + Delta^2``
and Pauli matrices ``tau0..tau3`` in Nambu space.  The retarded function is

    G^R = (a + eps tau3 + Delta tau1) / (a^2 - E^2),

so ``(G^R)^-1 = a - eps tau3 - Delta tau1``.  The Keldysh lesser and
time-ordered functions come from inverting the 4x4 contour action of the
mean-field model (see :func:`keldysh_action`); ``G^T = G^R + G^<``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TAU0 = np.eye(2, dtype=complex)
TAU1 = np.array([[0, 1], [1, 0]], dtype=complex)
TAU2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
TAU3 = np.array([[1, 0], [0, -1]], dtype=complex)

POLE_GUARD = 1e-14


class SingularPointError(ZeroDivisionError):
    """Evaluation too close to a pole of the Green's function."""


def dispersion(k, m: float = 1.0, mu: float = 0.5) -> float:
    k = np.atleast_1d(np.asarray(k, float))
    return float(np.dot(k, k) / (2 * m) - mu)


@dataclass(frozen=True)
class NambuGreens:
    """Green's-function evaluator for fixed ``Delta >= 0``, ``gn >= 0`` and dispersion."""

    delta: float
    gamma_n: float = 0.0
    m: float = 1.0
    mu: float = 0.5

    def eps(self, k) -> float:
        return dispersion(k, self.m, self.mu)

    def __call__(self, omega: float, k, kind: str = "R") -> np.ndarray:
        return greens(omega, self.eps(k), self.delta, self.gamma_n, kind)


def _retarded_den(omega, eps, delta, gn):
    a = omega + 0.5j * gn
    return a * a - eps * eps - delta * delta


def greens(omega: float, eps: float, delta: float, gamma_n: float, kind: str = "R") -> np.ndarray:
    """2x2 Nambu Green's function at frequency ``omega`` and energy ``eps``.

    Parameters
    ----------
    omega, eps : float
        Frequency and band energy ``eps_k``.
    delta, gamma_n : float
        Real gap and one-body-loss width ``gamma * n``.
    kind : {"R", "A", "<", "T", "Tt"}
        Retarded, advanced, lesser, time-ordered or anti-time-ordered.

    Raises
    ------
    SingularPointError
        If ``|a^2 - E^2| < 1e-14``.
    """
    den = _retarded_den(omega, eps, delta, gamma_n)
    if abs(den) < POLE_GUARD:
        raise SingularPointError(f"pole at omega={omega}, eps={eps}")
    a = omega + 0.5j * gamma_n
    GR = (a * TAU0 + eps * TAU3 + delta * TAU1) / den
    if kind == "R":
        return GR
    if kind == "A":
        return GR.conj().T
    G_less = _lesser(omega, eps, delta, gamma_n, abs(den) ** 2)
    if kind == "<":
        return G_less
    if kind == "T":
        return GR + G_less
    if kind == "Tt":
        return G_less - GR.conj().T
    raise ValueError(f"unknown kind {kind!r}")


def _lesser(omega, eps, delta, gn, A):
    # A = |a^2 - E^2|^2 = (omega^2 - E^2 - gn^2/4)^2 + omega^2 gn^2
    x = omega - eps
    return np.array([
        [1j * gn * delta ** 2, delta * gn * (0.5 * gn + 1j * x)],
        [delta * gn * (-0.5 * gn + 1j * x), 1j * gn * (x * x + 0.25 * gn * gn)],
    ], dtype=complex) / A


def keldysh_action(omega: float, eps: float, delta: float, gamma_n: float) -> np.ndarray:
    """4x4 quadratic form on ``(c_up+, cbar_dn+, c_up-, cbar_dn-)``.

    Its inverse has blocks ``[[G^T, G^<], [G^>, G^Tt]]``.
    """
    g = gamma_n
    return np.array([
        [omega - eps + 0.5j * g, -delta, 0, 0],
        [-delta, omega + eps - 0.5j * g, 0, 1j * g],
        [-1j * g, 0, -omega + eps + 0.5j * g, delta],
        [0, 0, delta, -omega - eps - 0.5j * g],
    ], dtype=complex)


# ---------------------------------------------------------------------------
# Ward-Takahashi vertex


def wt_vertex_lhs(omega, q0, eps_k, eps_kq, delta, gamma_n) -> np.ndarray:
    """``(G^R(k))^-1 tau3 - tau3 (G^R(k+q))^-1`` from numerical matrix inverses."""
    GR_k = greens(omega, eps_k, delta, gamma_n, "R")
    GR_kq = greens(omega + q0, eps_kq, delta, gamma_n, "R")
    return np.linalg.inv(GR_k) @ TAU3 - TAU3 @ np.linalg.inv(GR_kq)


def wt_vertex_rhs(q0, eps_k, eps_kq, delta) -> np.ndarray:
    """Closed form ``(eps_kq - eps_k) tau0 - q0 tau3 + 2 i Delta tau2``."""
    return (eps_kq - eps_k) * TAU0 - q0 * TAU3 + 2j * delta * TAU2


def wt_vertex_check(k, q, omega: float, omega_q: float, delta: float, gamma_n: float,
                    m: float = 1.0, mu: float = 0.5) -> float:
    """Frobenius norm of LHS - RHS of the retarded vertex identity.

    ``k`` and ``q`` are spatial momenta, ``omega_q = omega + q0``.
    """
    k = np.atleast_1d(np.asarray(k, float))
    q = np.atleast_1d(np.asarray(q, float))
    e_k = dispersion(k, m, mu)
    e_kq = dispersion(k + q, m, mu)
    q0 = omega_q - omega
    lhs = wt_vertex_lhs(omega, q0, e_k, e_kq, delta, gamma_n)
    return float(np.linalg.norm(lhs - wt_vertex_rhs(q0, e_k, e_kq, delta)))


def wt_sweep(samples: int, rng: np.random.Generator, gn_max_ratio: float = 10.0) -> np.ndarray:
    """Residuals of :func:`wt_vertex_check` at random points (``gn`` up to ``gn_max_ratio * Delta``)."""
    out = np.empty(samples)
    for i in range(samples):
        k = rng.uniform(-1.5, 1.5, 3)
        q = rng.uniform(-0.5, 0.5, 3)
        omega = rng.uniform(-2, 2)
        q0 = rng.uniform(-1, 1)
        delta = rng.uniform(0.01, 1.0)
        gn = rng.uniform(0, gn_max_ratio * delta)
        out[i] = wt_vertex_check(k, q, omega, omega + q0, delta, gn)
    return out


# ---------------------------------------------------------------------------
# response current


def transverse_projector(q) -> np.ndarray:
    q = np.asarray(q, float)
    q2 = float(np.dot(q, q))
    if q2 == 0:
        raise ZeroDivisionError("projector undefined at q = 0")
    return np.eye(len(q)) - np.outer(q, q) / q2


def response_current(q, A, n: float, m: float = 1.0):
    """Gauge-invariant current ``dJ = -(n/m)(A - q (q.A)/|q|^2)`` and ``dJ0 = 0``.

    Returns
    -------
    (ndarray, complex)
        Spatial current and time component.
    """
    q = np.asarray(q, float)
    A = np.asarray(A, complex)
    q2 = float(np.dot(q, q))
    if q2 == 0:
        raise ZeroDivisionError("response kernel undefined at q = 0")
    dJ = -(n / m) * (A - q * (np.dot(q, A) / q2))
    return dJ, 0j


def gauge_sweep(samples: int, rng: np.random.Generator, n: float = 1.0, m: float = 1.0):
    """Max change of dJ under ``A -> A + i q phi`` and max ``|q . dJ|`` over random draws."""
    shift = 0.0
    trans = 0.0
    for _ in range(samples):
        q = rng.normal(size=3)
        A = rng.normal(size=3) + 1j * rng.normal(size=3)
        phi = rng.normal() + 1j * rng.normal()
        j0, _ = response_current(q, A, n, m)
        j1, _ = response_current(q, A + 1j * q * phi, n, m)
        shift = max(shift, float(np.max(np.abs(j1 - j0))))
        trans = max(trans, float(abs(np.dot(q, j0))))
    return shift, trans


# ---------------------------------------------------------------------------
# density


def occupation_by_residues(eps, delta):
    """Per-mode density ``n_k`` from the frequency integral of the time-ordered function.

    Closing the contour around the pole at ``omega = -E`` of
    ``G^T = (omega + eps tau3 + Delta tau1)/(omega^2 - E^2)`` (Feynman
    prescription) gives residues ``(E - eps)/2E`` for the up particle
    (1,1 entry) and ``(E + eps)/2E`` for the down hole (2,2 entry), so
    ``n_k = res_11 + (1 - res_22)``.
    """
    eps = np.asarray(eps, float)
    E = np.sqrt(eps ** 2 + delta ** 2)
    pole = -E
    dden = 2 * pole  # d/d omega of omega^2 - E^2
    res11 = (pole + eps) / dden
    res22 = (pole - eps) / dden
    return res11 + (1.0 - res22)


def density_from_greens(delta: float, mu: float, grid) -> float:
    """Density ``sum_k w_k (1 - eps_k/E_k)`` with the frequency integral done by residues."""
    eps = grid.eps + grid.mu - mu
    if delta == 0:
        nk = np.where(eps < 0, 2.0, np.where(eps == 0, 1.0, 0.0))
    else:
        nk = occupation_by_residues(eps, delta)
    return float(np.sum(grid.w * nk))
