"""Jordan-Wigner fermion operators on the 4^L Fock space.

Conventions
-----------
* Modes are ordered site-major with spin up before spin down, so mode
  ``j = 2*site + (0 if up else 1)``.
* A basis index is the little-endian occupation bitstring: bit ``j`` of the
  index is the occupation of mode ``j``.
* ``c_j`` carries the string ``(-1)^(n_0 + ... + n_{j-1})`` over all
  earlier modes.
* Operators are ``scipy.sparse`` CSR matrices; density matrices are dense.
* Vectorization is row-major, ``vec(rho)[i*d + j] = rho[i, j]``, so that
  ``vec(A rho B) = kron(A, B.T) @ vec(rho)``.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .opspec import MAX_SITES, OperatorExpr

SPIN_INDEX = {"up": 0, "dn": 1}


class CapacityError(ValueError):
    """Requested system is larger than the exact tier supports."""


def mode_index(site: int, spin: str) -> int:
    return 2 * site + SPIN_INDEX[spin]


def _popcount(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.int64)
    c = np.zeros_like(x)
    while np.any(x):
        c += x & 1
        x = x >> 1
    return c


class SiteOps:
    """Family of ``c``, ``cdag`` and ``n`` operators for ``L`` sites.

    Operators are built once and shared; treat them as read-only.
    """

    def __init__(self, L: int):
        if not 1 <= L <= MAX_SITES:
            raise CapacityError(f"capacity exceeded: L={L} outside [1, {MAX_SITES}]")
        self.L = L
        self.num_modes = 2 * L
        self.dim = 4 ** L
        states = np.arange(self.dim)
        self._c = []
        for j in range(self.num_modes):
            occ = (states >> j) & 1
            src = states[occ == 1]
            sign = 1.0 - 2.0 * (_popcount(src & ((1 << j) - 1)) % 2)
            c = sp.csr_matrix((sign, (src ^ (1 << j), src)), shape=(self.dim, self.dim))
            self._c.append(c)
        self._cdag = [c.T.tocsr() for c in self._c]
        self._n = [sp.diags(((states >> j) & 1).astype(float)).tocsr() for j in range(self.num_modes)]
        self.N = sp.diags(_popcount(states).astype(float)).tocsr()
        self.identity = sp.identity(self.dim, format="csr")

    def c(self, site: int, spin: str):
        return self._c[self._mode(site, spin)]

    def cdag(self, site: int, spin: str):
        return self._cdag[self._mode(site, spin)]

    def n(self, site: int, spin: str):
        return self._n[self._mode(site, spin)]

    def site_density(self, site: int):
        return self.n(site, "up") + self.n(site, "dn")

    def get(self, kind: str, site: int, spin: str):
        return {"c": self.c, "cdag": self.cdag, "n": self.n}[kind](site, spin)

    def _mode(self, site, spin):
        if not 0 <= site < self.L:
            raise IndexError(f"site index {site} out of range for L={self.L}")
        if spin not in SPIN_INDEX:
            raise ValueError(f"invalid spin {spin!r}")
        return mode_index(site, spin)


@lru_cache(maxsize=None)
def build_site_ops(L: int) -> SiteOps:
    """Return the (cached) operator family for ``L`` sites, ``1 <= L <= 6``."""
    return SiteOps(L)


def compile_expr(expr: OperatorExpr, ops: SiteOps) -> sp.csr_matrix:
    """Evaluate an operator expression as a sparse matrix on ``ops``' Fock space."""
    out = sp.csr_matrix((ops.dim, ops.dim), dtype=complex)
    for t in expr.terms:
        m = ops.identity.astype(complex)
        for op in t.ops:
            m = m @ ops.get(op.kind, op.site, op.spin)
        out = out + t.coeff * m
    return out.tocsr()


# the operation is named ``compile`` in the module contract
compile = compile_expr


def num_sites_from_dim(dim: int) -> int:
    L = int(round(np.log(dim) / np.log(4)))
    if 4 ** L != dim:
        raise ValueError(f"dimension {dim} is not a power of 4")
    return L


# ---------------------------------------------------------------------------
# doubled space


def vectorize(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"dimension mismatch: expected a square matrix, got shape {rho.shape}")
    return rho.reshape(-1).copy()


def devectorize(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    if v.ndim != 1 or v.size != dim * dim:
        raise ValueError(f"dimension mismatch: vector of size {v.size} for dim {dim}")
    return v.reshape(dim, dim).copy()


def superop(A, B) -> sp.csr_matrix:
    """Matrix of ``rho -> A rho B`` acting on ``vec(rho)``."""
    return sp.kron(sp.csr_matrix(A), sp.csr_matrix(B).T, format="csr")


def swap_operator(dim: int) -> sp.csr_matrix:
    """SWAP on ``C^dim (x) C^dim``: ``S (x (x) y) = y (x) x``."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    i, j = np.divmod(np.arange(dim * dim), dim)
    return sp.csr_matrix((np.ones(dim * dim), (j * dim + i, i * dim + j)), shape=(dim * dim, dim * dim))


# ---------------------------------------------------------------------------
# states


def check_density_matrix(rho: np.ndarray, herm_tol=1e-12, trace_tol=1e-12, eig_tol=-1e-10) -> None:
    """Raise ``ValueError`` unless ``rho`` is Hermitian, unit-trace and PSD."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > herm_tol:
        raise ValueError(f"not Hermitian (deviation {herm:.3e})")
    tr = np.trace(rho)
    if abs(tr - 1) > trace_tol:
        raise ValueError(f"trace {tr.real:.15f} differs from 1")
    emin = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
    if emin < eig_tol:
        raise ValueError(f"negative eigenvalue {emin:.3e}")


def fock_state(occupations, L: int | None = None) -> np.ndarray:
    """Pure-state projector for a list of occupied modes or an explicit basis index."""
    if np.isscalar(occupations):
        idx = int(occupations)
        dim = 4 ** L
    else:
        idx = sum(1 << mode_index(s, sp_) for s, sp_ in occupations)
        dim = 4 ** L
    rho = np.zeros((dim, dim), dtype=complex)
    rho[idx, idx] = 1.0
    return rho


def pure_state(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random state ``G G^+ / Tr`` with complex Gaussian ``G`` of shape ``(dim, rank)``."""
    rank = dim if rank is None else rank
    G = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = G @ G.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def number_block_part(rho: np.ndarray, N=None) -> np.ndarray:
    """Project onto the number-block-diagonal part and renormalize (result commutes with N)."""
    if N is None:
        N = build_site_ops(num_sites_from_dim(rho.shape[0])).N
    n = np.asarray(N.diagonal()).real
    out = np.where(n[:, None] == n[None, :], rho, 0.0)
    return out / np.trace(out).real


def filled_state(L: int) -> np.ndarray:
    """All modes occupied."""
    return fock_state(4 ** L - 1, L)
