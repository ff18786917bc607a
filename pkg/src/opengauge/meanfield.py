"""Time-dependent BCS mean field with two-body loss.

Each momentum mode evolves as

    i d/dt (u, v) = [[-eps, conj(Delta)], [Delta, eps]] (u, v)

with the order parameter ``Delta = -U_c sum_k w_k conj(u_k) v_k`` and the
complex coupling ``U_c = U + i gamma / 2``.  Sums over modes use the
integration weights ``w_k`` of a :class:`MomentumGrid`, the same measure as
the gap equation ``1 = U sum_k w_k / (2 E_k)``.  For the ground state
(real non-negative u, v) this gives ``Delta(0) = -Delta0``.

Units: hbar = m = 1, ``eps_k = k^2/2 - mu`` with ``mu = 1/2`` so that
``k_F = v_F = 1``.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import bisect


class NoSolutionError(ValueError):
    """Gap equation has no positive root on this grid."""


class NormDriftError(RuntimeError):
    pass


@dataclass(frozen=True)
class MomentumGrid:
    """Radial momentum grid with integration weights.

    ``eps`` holds the kinetic energies at chemical potential ``mu``; for
    plain level lists (no ``k``) ``mu`` is only a reference shift.
    """

    eps: np.ndarray
    w: np.ndarray
    k: np.ndarray | None = None
    m: float = 1.0
    mu: float = 0.0
    cutoff: float | None = None

    def __post_init__(self):
        if len(self.eps) == 0:
            raise ValueError("grid is empty")
        if np.any(np.asarray(self.w) < 0):
            raise ValueError("weights must be non-negative")
        if np.any(np.diff(self.eps) <= 0):
            raise ValueError("eps must be strictly increasing")

    @property
    def kF(self) -> float:
        return float(np.sqrt(2 * self.m * self.mu)) if self.mu > 0 else 0.0

    @property
    def vF(self) -> float:
        return self.kF / self.m

    @property
    def total_weight(self) -> float:
        return float(np.sum(self.w))

    def shifted(self, mu: float) -> "MomentumGrid":
        """Same grid at a different chemical potential."""
        return replace(self, eps=self.eps + self.mu - mu, mu=mu)


def make_grid(n: int = 512, cutoff: float = 3.0, mu: float = 0.5, m: float = 1.0) -> MomentumGrid:
    """Midpoint grid in ``|k|`` on ``[0, cutoff]`` with 3D weights ``k^2 dk / (2 pi^2)``."""
    if n < 1 or cutoff <= 0:
        raise ValueError("grid size and cutoff must be positive")
    h = cutoff / n
    k = (np.arange(n) + 0.5) * h
    w = k ** 2 * h / (2 * np.pi ** 2)
    return MomentumGrid(k ** 2 / (2 * m) - mu, w, k, m, mu, cutoff)


def level_grid(eps, w) -> MomentumGrid:
    """Grid from explicit energy levels and weights."""
    return MomentumGrid(np.asarray(eps, float), np.asarray(w, float))


def gap_residual(delta: float, U: float, grid: MomentumGrid) -> float:
    E = np.sqrt(grid.eps ** 2 + delta ** 2)
    return 1.0 - U * np.sum(grid.w / (2 * E))


def solve_gap(U: float, grid: MomentumGrid, tol: float = 1e-10) -> float:
    """Positive root of ``1 = U sum_k w_k / (2 E_k)``.

    The residual is increasing in Delta, so a bracket ``[1e-12, hi]`` with
    ``hi = U sum(w)/2 + 1`` (where the residual is positive) is bisected.

    Raises
    ------
    NoSolutionError
        If the residual is already non-negative at ``Delta = 1e-12``.
    """
    if U <= 0:
        raise ValueError("U must be positive")
    lo = 1e-12
    hi = 0.5 * U * grid.total_weight + 1.0
    f = lambda d: gap_residual(d, U, grid)
    if f(lo) >= 0:
        raise NoSolutionError(f"no gap solution for U={U} on this grid (residual {f(lo):.3e} at Delta=1e-12)")
    delta = bisect(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    r = abs(f(delta))
    if r >= tol:
        raise NoSolutionError(f"gap residual {r:.2e} not below {tol:g}")
    return float(delta)


def coupling_for_gap(delta: float, grid: MomentumGrid) -> float:
    """Coupling ``U`` whose gap equation has root ``delta``."""
    E = np.sqrt(grid.eps ** 2 + delta ** 2)
    return float(1.0 / np.sum(grid.w / (2 * E)))


@dataclass
class BcsState:
    u: np.ndarray
    v: np.ndarray
    delta: complex
    t: float
    eps: np.ndarray
    w: np.ndarray

    def norm_error(self) -> float:
        return float(np.max(np.abs(np.abs(self.u) ** 2 + np.abs(self.v) ** 2 - 1)))


def order_parameter(u, v, w, Uc) -> complex:
    return complex(-Uc * np.sum(w * np.conj(u) * v))


def init_bcs(delta0: float, mu: float, grid: MomentumGrid) -> BcsState:
    """BCS ground state ``u = sqrt((E+eps)/2E)``, ``v = sqrt((E-eps)/2E)``."""
    if delta0 <= 0:
        raise ValueError("delta0 must be positive")
    eps = grid.eps + grid.mu - mu
    E = np.sqrt(eps ** 2 + delta0 ** 2)
    u = np.sqrt((E + eps) / (2 * E)).astype(complex)
    v = np.sqrt((E - eps) / (2 * E)).astype(complex)
    return BcsState(u, v, complex(-delta0), 0.0, eps, np.asarray(grid.w, float))


def mf_N(state: BcsState) -> float:
    return float(2 * np.sum(state.w * np.abs(state.v) ** 2))


def mf_ON(state: BcsState, check: bool = True) -> float:
    """Mean-field ``O_N = -4 sum_k w_k |u_k|^2 |v_k|^2``.

    With ``check`` the equivalent form ``-2N + sum_k w_k n_k^2``
    (``n_k = 2|v_k|^2``) is evaluated too and must agree to 1e-10.
    """
    u2 = np.abs(state.u) ** 2
    v2 = np.abs(state.v) ** 2
    on = float(-4 * np.sum(state.w * u2 * v2))
    if check:
        alt = float(-2 * mf_N(state) + np.sum(state.w * (2 * v2) ** 2))
        if abs(alt - on) > 1e-10:
            raise AssertionError(f"O_N forms disagree ({on} vs {alt}); state not normalized?")
    return on


@dataclass
class BcsTrajectory:
    times: np.ndarray
    delta: np.ndarray
    N: np.ndarray
    ON: np.ndarray
    final: BcsState
    dt: float
    norm_drift: float
    states: list = field(default_factory=list)


def _rhs(u, v, eps, w, Uc, fixed=None):
    d = order_parameter(u, v, w, Uc) if fixed is None else fixed
    du = -1j * (-eps * u + np.conj(d) * v)
    dv = -1j * (d * u + eps * v)
    return du, dv


def _integrate(state, Uc, h, nrec, sub, keep_states, fixed=None):
    u, v = state.u.copy(), state.v.copy()
    eps, w = state.eps, state.w
    gap = (lambda u_, v_: order_parameter(u_, v_, w, Uc)) if fixed is None else (lambda u_, v_: fixed)
    times, deltas, Ns, ONs, states = [0.0], [gap(u, v)], [], [], []
    tmp = BcsState(u, v, deltas[0], state.t, eps, w)
    Ns.append(mf_N(tmp))
    ONs.append(mf_ON(tmp, check=False))
    if keep_states:
        states.append(tmp)
    drift = 0.0
    for i in range(nrec):
        for _ in range(sub):
            k1 = _rhs(u, v, eps, w, Uc, fixed)
            k2 = _rhs(u + 0.5 * h * k1[0], v + 0.5 * h * k1[1], eps, w, Uc, fixed)
            k3 = _rhs(u + 0.5 * h * k2[0], v + 0.5 * h * k2[1], eps, w, Uc, fixed)
            k4 = _rhs(u + h * k3[0], v + h * k3[1], eps, w, Uc, fixed)
            u = u + (h / 6) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            v = v + (h / 6) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        cur = BcsState(u, v, gap(u, v), state.t + (i + 1) * h * sub, eps, w)
        drift = max(drift, cur.norm_error())
        times.append((i + 1) * h * sub)
        deltas.append(cur.delta)
        Ns.append(mf_N(cur))
        ONs.append(mf_ON(cur, check=False))
        if keep_states:
            states.append(cur)
    return np.array(times), np.array(deltas), np.array(Ns), np.array(ONs), cur, drift, states


def evolve_bcs(state: BcsState, U: float, gamma: float, dt: float, T: float,
               norm_tol: float = 1e-8, max_halvings: int = 6, keep_states: bool = False,
               fixed_delta: complex | None = None) -> BcsTrajectory:
    """RK4 for all modes with the order parameter recomputed at every stage.

    Records observables every ``dt``; the internal step is halved until the
    per-mode normalization drift stays below ``norm_tol``.  With
    ``fixed_delta`` the gap is an external field held at that value instead
    of being self-consistent.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    nrec = int(round(T / dt))
    Uc = U + 0.5j * gamma
    sub = 1
    for _ in range(max_halvings + 1):
        res = _integrate(state, Uc, dt / sub, nrec, sub, keep_states, fixed_delta)
        if res[5] < norm_tol:
            break
        sub *= 2
    else:
        raise NormDriftError(f"per-mode norm drift {res[5]:.2e} exceeds {norm_tol:g}")
    times, deltas, Ns, ONs, final, drift, states = res
    return BcsTrajectory(state.t + times, deltas, Ns, ONs, final, dt / sub, drift, states)


def bcs_csv(traj: BcsTrajectory) -> str:
    """CSV text with header ``t,Re(Delta),Im(Delta),absDelta,N,ON_mf``."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["t", "Re(Delta)", "Im(Delta)", "absDelta", "N", "ON_mf"])
    for t, d, n, o in zip(traj.times, traj.delta, traj.N, traj.ON):
        wr.writerow([repr(float(t)), repr(float(d.real)), repr(float(d.imag)), repr(float(abs(d))),
                     repr(float(n)), repr(float(o))])
    return buf.getvalue()
