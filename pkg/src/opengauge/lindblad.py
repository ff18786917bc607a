"""Exact Lindblad dynamics on small Hubbard lattices.

The dissipator for a jump operator ``L`` with rate ``gamma`` is
``gamma * (L rho L^+ - {L^+ L, rho} / 2)``.  In vectorized (row-major) form

    Lv = -i (H (x) I - I (x) H^T)
         + sum_k gamma_k [L (x) conj(L) - (L^+L (x) I + I (x) (L^+L)^T) / 2].
"""
from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fock import CapacityError, SiteOps, build_site_ops, compile_expr, num_sites_from_dim, swap_operator
from .opspec import ModelSpec, validate

MAX_LIOUVILLIAN_DIM = 4096
CSV_HEADER = ["t", "N", "ON_direct", "ON_vec", "ON_swap", "trace", "residual_max"]


class IntegrationError(RuntimeError):
    """Step halving failed to reach the requested tolerance."""


def build_hamiltonian(spec: ModelSpec, ops: SiteOps) -> sp.csr_matrix:
    """Hubbard chain ``-J sum (c+ c + h.c.) - U sum n_up n_dn - mu N``."""
    H = sp.csr_matrix((ops.dim, ops.dim), dtype=complex)
    for a, b in spec.bonds():
        for s in ("up", "dn"):
            hop = ops.cdag(a, s) @ ops.c(b, s)
            H = H - spec.J * (hop + hop.T.conj())
    for r in range(spec.num_sites):
        H = H - spec.U * (ops.n(r, "up") @ ops.n(r, "dn"))
    H = H - spec.mu * ops.N
    return H.tocsr()


def liouvillian_matrix(H, jumps) -> sp.csr_matrix:
    """Vectorized Liouvillian for Hamiltonian ``H`` and ``[(gamma, L), ...]``."""
    H = sp.csr_matrix(H)
    d = H.shape[0]
    I = sp.identity(d, format="csr")
    Lv = -1j * (sp.kron(H, I) - sp.kron(I, H.T))
    for g, L in jumps:
        L = sp.csr_matrix(L)
        LdL = (L.conj().T @ L).tocsr()
        Lv = Lv + g * (sp.kron(L, L.conj()) - 0.5 * (sp.kron(LdL, I) + sp.kron(I, LdL.T)))
    return sp.csr_matrix(Lv)


@dataclass
class Liouvillian:
    matrix: sp.csr_matrix
    H: sp.csr_matrix
    jumps: list
    ops: SiteOps
    spec: ModelSpec | None = None

    @property
    def dim(self) -> int:
        return self.ops.dim

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return (self.matrix @ rho.reshape(-1)).reshape(rho.shape)


def build_liouvillian(spec: ModelSpec) -> Liouvillian:
    """Build the Liouvillian of a parsed model.

    Raises
    ------
    CapacityError
        If the superoperator dimension ``(4^L)^2`` exceeds 4096 (``L > 3``).
    ValueError
        If the spec fails validation.
    """
    problems = [p for p in validate(spec) if not p.startswith("capacity")]
    if problems:
        raise ValueError("invalid model: " + "; ".join(problems))
    if not 1 <= spec.num_sites or (4 ** spec.num_sites) ** 2 > MAX_LIOUVILLIAN_DIM:
        raise CapacityError(f"capacity exceeded: superoperator dim (4^{spec.num_sites})^2 > {MAX_LIOUVILLIAN_DIM}")
    ops = build_site_ops(spec.num_sites)
    H = build_hamiltonian(spec, ops)
    jumps = [(d.rate, compile_expr(d.expr, ops)) for d in spec.dissipators]
    return Liouvillian(liouvillian_matrix(H, jumps), H, jumps, ops, spec)


def from_operators(H, jumps, L: int) -> Liouvillian:
    """Liouvillian for explicit operators on the ``L``-site Fock space."""
    ops = build_site_ops(L)
    return Liouvillian(liouvillian_matrix(H, jumps), sp.csr_matrix(H), list(jumps), ops, None)


# ---------------------------------------------------------------------------
# observables


@lru_cache(maxsize=8)
def _default_number_op(d: int):
    return build_site_ops(num_sites_from_dim(d)).N


@lru_cache(maxsize=8)
def _doubled(d: int):
    """Cached doubled-space pieces for the standard number operator."""
    return _doubled_for(_default_number_op(d))


def _doubled_for(N):
    N = sp.csr_matrix(N)
    d = N.shape[0]
    I = sp.identity(d, format="csr")
    G = (sp.kron(N, I) - sp.kron(I, N.T)).tocsr()
    swap = None
    if d * d <= MAX_LIOUVILLIAN_DIM:
        S = swap_operator(d)
        swap = (_swap_index(sp.kron(N, N) @ S, d), _swap_index(sp.kron(N @ N, I) @ S, d))
    return N, (N @ N).tocsr(), G, swap


def _swap_index(M, d):
    M = M.tocoo()
    i, j = np.divmod(M.row, d)
    k, l = np.divmod(M.col, d)
    return M.data, i, j, k, l


def _ops_for(rho, N):
    if N is None:
        return _doubled(rho.shape[0])
    return _doubled_for(N)


def observable_N(rho: np.ndarray, N=None) -> float:
    N = _ops_for(rho, N)[0]
    return float(np.real(np.trace(N @ rho)))


def observable_ON_direct(rho: np.ndarray, N=None) -> float:
    """``Tr[N rho N rho] - Tr[N^2 rho^2]``."""
    N, N2, _, _ = _ops_for(rho, N)
    Nr = N @ rho
    return float(np.real(np.trace(Nr @ Nr) - np.trace(N2 @ (rho @ rho))))


def observable_ON_vectorized(rho: np.ndarray, N=None) -> float:
    """``-1/2 <<rho| (N (x) I - I (x) N)^2 |rho>>``."""
    G = _ops_for(rho, N)[2]
    v = rho.reshape(-1)
    return float(np.real(-0.5 * np.vdot(v, G @ (G @ v))))


def _swap_trace(idx, rho):
    """``Tr[M (rho (x) rho)]`` for ``M = (A (x) B) S`` given as COO pieces."""
    data, i, j, k, l = idx
    # (rho (x) rho)[(k,l),(i,j)] = rho[k,i] rho[l,j]
    return np.sum(data * rho[k, i] * rho[l, j])


def observable_ON_swap(rho: np.ndarray, N=None) -> float:
    """O_N from two copies of ``rho`` and the SWAP operator on the doubled space.

    ``Tr[N rho N rho] = Tr[(N (x) N) S (rho (x) rho)]`` and
    ``Tr[N^2 rho^2] = Tr[(N^2 (x) I) S (rho (x) rho)]``.
    """
    d = rho.shape[0]
    if d * d > MAX_LIOUVILLIAN_DIM:
        raise CapacityError(f"capacity exceeded: doubled dim {d * d} > {MAX_LIOUVILLIAN_DIM}")
    nn, n2 = _ops_for(rho, N)[3]
    return float(np.real(_swap_trace(nn, rho) - _swap_trace(n2, rho)))


# ---------------------------------------------------------------------------
# evolution


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (nt, d, d)
    dt: float
    h: float  # internal RK4 step
    observables: dict = field(default_factory=dict)
    liouvillian: Liouvillian | None = None

    def __len__(self):
        return len(self.times)


def _rk4(M, v, h, nsteps):
    for _ in range(nsteps):
        k1 = M @ v
        k2 = M @ (v + 0.5 * h * k1)
        k3 = M @ (v + 0.5 * h * k2)
        k4 = M @ (v + h * k3)
        v = v + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return v


DENSE_PROPAGATOR_DIM = 1024


def _run(M, v0, nrec, substeps, h):
    out = np.empty((nrec + 1, v0.size), dtype=complex)
    out[0] = v0
    v = v0
    if v0.size <= DENSE_PROPAGATOR_DIM:
        # one RK4 step of a linear ODE is the quartic Taylor polynomial of hM
        A = h * M.toarray()
        A2 = A @ A
        step = np.eye(v0.size) + A + A2 / 2 + A2 @ A / 6 + A2 @ A2 / 24
        P = np.linalg.matrix_power(step, substeps)
        for i in range(nrec):
            v = P @ v
            out[i + 1] = v
        return out
    for i in range(nrec):
        v = _rk4(M, v, h, substeps)
        out[i + 1] = v
    return out


def _record(states, N=None):
    obs = {"N": [], "ON_direct": [], "ON_vec": [], "ON_swap": [], "trace": []}
    swap_ok = states.shape[1] ** 2 <= MAX_LIOUVILLIAN_DIM
    for rho in states:
        obs["N"].append(observable_N(rho, N))
        obs["ON_direct"].append(observable_ON_direct(rho, N))
        obs["ON_vec"].append(observable_ON_vectorized(rho, N))
        obs["ON_swap"].append(observable_ON_swap(rho, N) if swap_ok else np.nan)
        obs["trace"].append(float(np.real(np.trace(rho))))
    return {k: np.array(v) for k, v in obs.items()}


def evolve(liou: Liouvillian, rho0: np.ndarray, T: float, dt: float, tol: float = 1e-10,
           max_halvings: int = 10, check_positivity: bool = True) -> Trajectory:
    """Integrate ``d rho/dt = L rho`` with classical RK4.

    Snapshots are stored every ``dt``.  The internal step starts at ``dt``
    and is halved until ``N`` and ``O_N`` agree with the next halving to
    ``tol``; the finer run is returned.

    Parameters
    ----------
    liou : Liouvillian
    rho0 : ndarray
        Initial density matrix.
    T, dt : float
        Final time and snapshot spacing.
    tol : float
        Step-halving tolerance on recorded observables.
    max_halvings : int
        Give up with :class:`IntegrationError` after this many halvings.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if T < 0:
        raise ValueError("T must be non-negative")
    rho0 = np.asarray(rho0, dtype=complex)
    d = liou.dim
    if rho0.shape != (d, d):
        raise ValueError(f"dimension mismatch: rho0 {rho0.shape} vs Liouvillian dim {d}")
    N = None  # standard total number operator, cached by dimension
    nrec = int(round(T / dt))
    if abs(nrec * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError("T must be an integer multiple of dt")
    times = dt * np.arange(nrec + 1)
    if nrec == 0:
        states = rho0[None].copy()
        return Trajectory(times, states, dt, dt, _record(states, N), liou)

    M = liou.matrix
    v0 = rho0.reshape(-1)
    sub = 1
    prev = _run(M, v0, nrec, sub, dt)
    prev_obs = _record(prev.reshape(-1, d, d), N)
    for _ in range(max_halvings):
        sub *= 2
        cur = _run(M, v0, nrec, sub, dt / sub)
        cur_obs = _record(cur.reshape(-1, d, d), N)
        drift = max(np.max(np.abs(cur_obs[k] - prev_obs[k])) for k in ("N", "ON_direct", "trace"))
        if drift < tol:
            break
        prev, prev_obs = cur, cur_obs
    else:
        raise IntegrationError(f"step halving did not converge to {tol:g} (last change {drift:.2e})")

    states = cur.reshape(-1, d, d)
    trace_rate = np.max(np.abs(cur_obs["trace"] - 1.0)) / max(T, 1e-300)
    if trace_rate > 1e-10:
        raise IntegrationError(f"trace drift per unit time {trace_rate:.2e} exceeds 1e-10")
    if check_positivity:
        for t, rho in zip(times, states):
            emin = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
            if emin < -1e-8:
                raise IntegrationError(f"snapshot at t={t:g} has eigenvalue {emin:.2e} < -1e-8")
    return Trajectory(times, states, dt, dt / sub, cur_obs, liou)


# ---------------------------------------------------------------------------
# continuity equation


def bond_current(ops: SiteOps, J: float, a: int, b: int):
    """Particle current operator from site ``a`` to ``b`` for hopping ``-J (c+_a c_b + h.c.)``."""
    j = sp.csr_matrix((ops.dim, ops.dim), dtype=complex)
    for s in ("up", "dn"):
        j = j + 1j * J * (ops.cdag(b, s) @ ops.c(a, s) - ops.cdag(a, s) @ ops.c(b, s))
    return j.tocsr()


def dissipative_divergence(ops: SiteOps, site: int, gamma: float, L):
    """On-site ``div j_d = (i gamma / 2)(L^+ dL - dL^+ L)`` with ``dB = i [n_r, B]``.

    This equals ``-gamma (L^+ n L - {L^+ L, n}/2)``, i.e. minus the adjoint
    dissipator acting on ``n_r``; for two-body loss it is
    ``2 gamma n_up n_dn``.
    """
    n = ops.site_density(site)
    L = sp.csr_matrix(L)
    Ld = L.conj().T

    def d(B):
        return 1j * (n @ B - B @ n)

    return (0.5j * gamma * (Ld @ d(L) - d(Ld) @ L)).tocsr()


def _dissipator_site(expr):
    sites = expr.sites()
    if len(sites) != 1:
        raise NotImplementedError(
            f"continuity check supports on-site dissipators only; got sites {sorted(sites)}")
    return next(iter(sites))


@dataclass
class ContinuityResult:
    times: np.ndarray  # interior times
    residual: np.ndarray  # (len(times), L)
    max_per_site: np.ndarray


def continuity_residual(traj: Trajectory, spec: ModelSpec) -> ContinuityResult:
    """Lattice continuity residual ``d<n_r>/dt + div<j_c>_r + <div j_d>_r``.

    The time derivative is a centered difference on the snapshot grid, so
    only interior times are returned.
    """
    ops = build_site_ops(spec.num_sites)
    states = traj.states
    if len(states) < 3:
        raise ValueError("trajectory needs at least 3 snapshots for centered differences")
    dt = traj.dt
    liou = traj.liouvillian
    if liou is not None:
        scale = spla.norm(liou.matrix, ord=np.inf)
        if dt * scale > 0.5:
            warnings.warn(f"trajectory too coarse for centered differences (dt*|L| = {dt * scale:.2f})")

    L = spec.num_sites
    dens = [ops.site_density(r) for r in range(L)]
    div = [sp.csr_matrix((ops.dim, ops.dim), dtype=complex) for _ in range(L)]
    for a, b in spec.bonds():
        j_ab = bond_current(ops, spec.J, a, b)
        div[a] = div[a] + j_ab
        div[b] = div[b] - j_ab
    for d_ in spec.dissipators:
        r = _dissipator_site(d_.expr)
        div[r] = div[r] + dissipative_divergence(ops, r, d_.rate, compile_expr(d_.expr, ops))

    def expect(A):
        return np.real(np.einsum("ij,tji->t", A.toarray(), states))

    n_t = np.stack([expect(dens[r]) for r in range(L)], axis=1)
    div_t = np.stack([expect(div[r]) for r in range(L)], axis=1)[1:-1]
    dndt = (n_t[2:] - n_t[:-2]) / (2 * dt)
    res = dndt + div_t
    return ContinuityResult(traj.times[1:-1], res, np.max(np.abs(res), axis=0))


# ---------------------------------------------------------------------------
# export


def trajectory_csv(traj: Trajectory, residual: ContinuityResult | None = None) -> str:
    """CSV text with header ``t,N,ON_direct,ON_vec,ON_swap,trace,residual_max``."""
    rmax = np.full(len(traj.times), np.nan)
    if residual is not None:
        rmax[1:-1] = np.max(np.abs(residual.residual), axis=1)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    o = traj.observables
    for i, t in enumerate(traj.times):
        w.writerow([repr(float(t))] + [repr(float(o[k][i])) for k in ("N", "ON_direct", "ON_vec", "ON_swap", "trace")]
                   + ["" if np.isnan(rmax[i]) else repr(float(rmax[i]))])
    return buf.getvalue()
