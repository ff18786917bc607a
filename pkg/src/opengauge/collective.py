"""Nambu-Goldstone mode of the dissipative BCS state.

Zeroth order (no loss): the sound velocity is the root ``q0(q)`` of

    R(q0, q) = (U/4) sum_k w_k < (E + E')/(E E') (q0^2 - (k q c/m)^2)
                                  / (q0^2 - (E + E')^2) >_c

where ``E' = E_{k+q}``, ``c`` is the cosine between k and q and ``<>_c``
the angle average.  First order in ``gamma n`` gives the diffusive
correction ``q0 = v_s q + i gamma n f(q)`` through

    v_F q f(q) sum_k w_k / (4 sqrt(3) Delta^3)
        = sum_k w_k < sum_i A_i / (4 E^3 (q0 + E - E')^2 (q0 + E + E')^2) >_c .
"""
from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.optimize import bisect

from .meanfield import MomentumGrid

GL_ORDER = 64
SCAN_POINTS = 32
EDGE_FRACTION = 0.95


class ContinuumError(ValueError):
    """Frequency lies in the pair-breaking continuum."""


class NoRootError(ValueError):
    pass


class QuadratureError(RuntimeError):
    pass


def _gauss_legendre(order=GL_ORDER):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w / 2  # weights of the average over c in [-1, 1]


def _pair_energies(q, delta, grid: MomentumGrid, mu):
    if grid.k is None:
        raise ValueError("collective-mode integrals need a momentum grid with k values")
    c, wc = _gauss_legendre()
    k = grid.k[:, None]
    m = grid.m
    eps = grid.k ** 2 / (2 * m) - mu
    E = np.sqrt(eps ** 2 + delta ** 2)[:, None]
    kq2 = k ** 2 + q ** 2 + 2 * k * q * c[None, :]
    Ep = np.sqrt((kq2 / (2 * m) - mu) ** 2 + delta ** 2)
    return k, c, wc, E, Ep


def continuum_edge(q, delta, grid: MomentumGrid, mu=None) -> float:
    """``min_k (E_k + E_{k+q})`` over the quadrature nodes."""
    mu = grid.mu if mu is None else mu
    _, _, _, E, Ep = _pair_energies(q, delta, grid, mu)
    return float(np.min(E + Ep))


def zeroth_order_residual(q0: float, q: float, delta: float, grid: MomentumGrid,
                          mu: float | None = None, U: float = 1.0) -> float:
    """Angle-averaged zeroth-order vertex condition (Gauss-Legendre in the cosine).

    Raises
    ------
    ContinuumError
        If ``|q0|`` reaches the pair-breaking continuum.
    """
    mu = grid.mu if mu is None else mu
    k, c, wc, E, Ep = _pair_energies(q, delta, grid, mu)
    S = E + Ep
    if abs(q0) >= np.min(S):
        raise ContinuumError(f"q0={q0} inside the continuum (edge {np.min(S):.6g})")
    kc = k * q * c[None, :] / grid.m
    f = S / (E * Ep) * (q0 ** 2 - kc ** 2) / (q0 ** 2 - S ** 2)
    return float(0.25 * U * np.sum(grid.w * (f @ wc)))


def find_root(q: float, delta: float, grid: MomentumGrid, mu: float | None = None) -> float:
    """Smallest positive root of the zeroth-order residual below the continuum.

    Scans 32 points up to 0.95 of the continuum edge and bisects the first
    sign change.
    """
    mu = grid.mu if mu is None else mu
    edge = continuum_edge(q, delta, grid, mu)
    xs = np.linspace(0.0, EDGE_FRACTION * edge, SCAN_POINTS + 1)
    f = lambda x: zeroth_order_residual(x, q, delta, grid, mu)
    vals = [f(x) for x in xs]
    for a, b, fa, fb in zip(xs[:-1], xs[1:], vals[:-1], vals[1:]):
        if fa == 0:
            return float(a)
        if fa * fb < 0:
            return float(bisect(f, a, b, xtol=1e-16, rtol=8 * np.finfo(float).eps, maxiter=200))
    raise NoRootError(f"no sign change of the residual below {EDGE_FRACTION} x continuum edge at q={q}")


@dataclass
class SoundVelocity:
    q: np.ndarray
    q0: np.ndarray
    v_s: float
    v_s_analytic: float

    @property
    def rel_err(self) -> float:
        return abs(self.v_s / self.v_s_analytic - 1)


def solve_sound_velocity(qs, delta: float, grid: MomentumGrid, mu: float | None = None) -> SoundVelocity:
    """Fit ``q0 = v_s q`` through the origin to the zeroth-order roots."""
    mu = grid.mu if mu is None else mu
    qs = np.asarray(qs, float)
    roots = np.array([find_root(q, delta, grid, mu) for q in qs])
    v_s = float(np.dot(qs, roots) / np.dot(qs, qs))
    vF = np.sqrt(2 * mu / grid.m)
    return SoundVelocity(qs, roots, v_s, float(vF / np.sqrt(3)))


def diffusion_analytic(gamma: float, n: float, vF: float, delta: float) -> float:
    """``D = 3 sqrt(3) gamma n vF^2 / (8 Delta^2)``."""
    if delta == 0:
        raise ZeroDivisionError("D undefined at Delta = 0")
    return 3 * np.sqrt(3) * gamma * n * vF ** 2 / (8 * delta ** 2)


# ---------------------------------------------------------------------------
# first order


def _cubic_coeffs(e, E, delta, q0):
    """Numerator ``A1+A2+A3+A4`` as a cubic in ``x = eps_{k+q}`` (with ``E'^2 = x^2 + Delta^2``)."""
    D2 = delta ** 2
    c0 = -D2 * e ** 3 - D2 * e * q0 ** 2 - 2 * e ** 5 - 2 * e ** 3 * q0 ** 2 - 4 * e ** 3 * q0 * E
    c1 = 3 * D2 * e ** 2 - D2 * q0 ** 2 + 4 * e ** 4 + 4 * e ** 2 * q0 * E
    c2 = -3 * D2 * e - 2 * e ** 3
    c3 = D2 + 0 * e
    return np.array([c0, c1, c2, c3])


def first_order_numerator(e, ep, delta, q0):
    """``A1 + A2 + A3 + A4`` evaluated term by term."""
    E = np.sqrt(e ** 2 + delta ** 2)
    Ep2 = ep ** 2 + delta ** 2
    D2 = delta ** 2
    a1 = E ** 2 * (Ep2 * ep + (3 * e - 2 * ep) * (D2 + e * ep) - q0 ** 2 * (ep + 2 * e))
    a2 = 4 * q0 * E * e * (D2 + e * ep)
    a3 = -e * (Ep2 - q0 ** 2) * (D2 + e * ep)
    a4 = E ** 4 * (ep - 2 * e) - 4 * q0 * E ** 3 * e
    return a1 + a2 + a3 + a4


def _primitives(x, s):
    """Antiderivatives in ``x`` of ``x^j / (s^2 - x^2)^2`` for ``j = 0..3``."""
    d = s * s - x * x
    L = np.log(s + x) - np.log(s - x)
    return np.array([
        x / (2 * s * s * d) + L / (4 * s ** 3),
        1 / (2 * d),
        x / (2 * d) - L / (4 * s),
        s * s / (2 * d) + 0.5 * np.log(d),
    ])


def _angle_average(k, q, delta, q0, m, mu):
    """Exact average over the cosine of the first-order integrand at fixed ``|k|``.

    With ``x = eps_{k+q}`` the integrand is a cubic in ``x`` over
    ``(s^2 - x^2)^2``, ``s^2 = (q0 + E)^2 - Delta^2``, and ``dc = m dx/(k q)``.
    """
    e = k * k / (2 * m) - mu
    E = np.sqrt(e * e + delta * delta)
    s = np.sqrt((q0 + E) ** 2 - delta * delta + 0j)
    a = (k - q) ** 2 / (2 * m) - mu
    b = (k + q) ** 2 / (2 * m) - mu
    P = _primitives(b, s) - _primitives(a, s)
    beta = k * q / m
    return _cubic_coeffs(e, E, delta, q0) @ P / (4 * E ** 3) / (2 * beta)


def first_order_integral(q: float, q0: complex, delta: float, grid: MomentumGrid,
                         mu: float | None = None, k_min: float = 1e-4) -> complex:
    """``sum_k w_k <integrand>_c`` with adaptive radial quadrature on ``[k_min, cutoff]``."""
    mu = grid.mu if mu is None else mu
    m = grid.m
    cutoff = grid.cutoff if grid.cutoff is not None else float(grid.k[-1])
    kF = np.sqrt(2 * m * mu)
    width = delta * m / max(kF, 1e-12)
    pts = sorted({float(p) for p in kF + np.array([-20, -5, -2, -1, -0.5, 0, 0.5, 1, 2, 5, 20]) * width
                  if k_min < p < cutoff} | {float(p) for p in (kF - q, kF + q) if k_min < p < cutoff})

    def integrand(k, part):
        v = k * k / (2 * np.pi ** 2) * _angle_average(k, q, delta, q0, m, mu)
        return v.real if part == 0 else v.imag

    out = []
    for part in (0, 1):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IntegrationWarning)
            val, err = quad(integrand, k_min, cutoff, args=(part,), points=pts, limit=2000,
                            epsabs=1e-12, epsrel=1e-9)
        if not np.isfinite(val) or err > 1e-6 * max(abs(val), 1e-9):
            raise QuadratureError(f"radial quadrature did not converge at q={q} (estimate {val:.3e} +- {err:.1e})")
        out.append(val)
    return complex(out[0], out[1])


@dataclass
class DiffusionFit:
    q: np.ndarray
    q0: np.ndarray
    f_q: np.ndarray  # complex f(q)
    D_est: np.ndarray  # gamma n Re f(q) / q^2 per q
    D_fit: float
    D_analytic: float
    branch: int = 1
    extra: dict = field(default_factory=dict)

    @property
    def rel_err(self) -> float:
        return abs(self.D_fit / self.D_analytic - 1) if self.D_analytic else float("inf")


def diffusion_numeric(qs, gamma: float, n: float, delta: float, grid: MomentumGrid,
                      mu: float | None = None, branch: int = 1, eta: float = 1e-6) -> DiffusionFit:
    """First-order extraction of the diffusion coefficient.

    For each ``q`` the first-order integral is evaluated at
    ``q0 = branch * v_F q / sqrt(3) + i eta`` (retarded prescription), then

        f(q) = 4 sqrt(3) Delta^3 I(q) / (v_F q sum_k w_k),

    and ``gamma n f(q) = D q^2`` is fitted through the origin using
    ``Re f``.
    """
    mu = grid.mu if mu is None else mu
    if gamma * n > 0.1 * delta:
        warnings.warn(f"gamma*n = {gamma * n:g} exceeds 0.1*Delta; first-order expansion may not hold")
    qs = np.asarray(qs, float)
    vF = np.sqrt(2 * mu / grid.m)
    wsum = (grid.cutoff if grid.cutoff is not None else grid.k[-1]) ** 3 / (6 * np.pi ** 2)
    q0s = branch * vF * qs / np.sqrt(3) + 1j * eta
    f = np.array([4 * np.sqrt(3) * delta ** 3 * first_order_integral(q, q0, delta, grid, mu) / (vF * q * wsum)
                  for q, q0 in zip(qs, q0s)])
    D_est = gamma * n * f.real / qs ** 2
    D_fit = float(gamma * n * np.dot(qs ** 2, f.real) / np.dot(qs ** 2, qs ** 2))
    return DiffusionFit(qs, q0s, f, D_est, D_fit, diffusion_analytic(gamma, n, vF, delta), branch)


def dispersion_csv(sv: SoundVelocity, df: DiffusionFit | None) -> str:
    """CSV text with header ``q,q0_root,f_q,D_est,D_analytic``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["q", "q0_root", "f_q", "D_est", "D_analytic"])
    for i, (q, r) in enumerate(zip(sv.q, sv.q0)):
        if df is not None:
            row = [repr(float(df.f_q[i].real)), repr(float(df.D_est[i])), repr(float(df.D_analytic))]
        else:
            row = ["", "", ""]
        w.writerow([repr(float(q)), repr(float(r))] + row)
    return buf.getvalue()
