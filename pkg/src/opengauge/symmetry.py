"""Strong / weak / no U(1) classification of Lindbladians.

Strong: ``[H, N] = 0`` and ``[L_k, N] = 0`` for every jump operator.
Weak: the Liouvillian commutes with the phase-rotation generator
``N (x) I - I (x) N^T`` on vectorized density matrices.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fock import build_site_ops, number_block_part, random_density_matrix
from .lindblad import Liouvillian, build_liouvillian, evolve
from .opspec import ModelSpec

SYM_TOL = 1e-10
CONSERVED_TOL = 1e-7
BROKEN_TOL = 1e-3


class Symmetry(str, enum.Enum):
    STRONG = "Strong"
    WEAK = "Weak"
    NONE = "None"


@dataclass
class SymmetryClass:
    label: Symmetry
    norms: dict = field(default_factory=dict)

    def __str__(self):
        return self.label.value


def _fro(A) -> float:
    return float(spla.norm(A)) if sp.issparse(A) else float(np.linalg.norm(A))


def phase_generator(N) -> sp.csr_matrix:
    """``N (x) I - I (x) N^T``."""
    N = sp.csr_matrix(N)
    I = sp.identity(N.shape[0], format="csr")
    return (sp.kron(N, I) - sp.kron(I, N.T)).tocsr()


def classify_operators(H, jumps, N, liouvillian=None, tol: float = SYM_TOL) -> SymmetryClass:
    """Classify explicit ``H`` and ``[(gamma, L), ...]`` against number operator ``N``."""
    from .lindblad import liouvillian_matrix

    H = sp.csr_matrix(H)
    N = sp.csr_matrix(N)
    Lv = liouvillian if liouvillian is not None else liouvillian_matrix(H, jumps)
    h_norm = _fro(H @ N - N @ H)
    l_norms = [_fro(sp.csr_matrix(L) @ N - N @ sp.csr_matrix(L)) for g, L in jumps if g != 0]
    G = phase_generator(N)
    w_norm = _fro(G @ Lv - Lv @ G)
    norms = {"H_N": h_norm, "L_N": l_norms, "superoperator": w_norm}
    weak = w_norm < tol
    strong = weak and h_norm < tol and all(x < tol for x in l_norms)
    label = Symmetry.STRONG if strong else Symmetry.WEAK if weak else Symmetry.NONE
    return SymmetryClass(label, norms)


def classify(spec: ModelSpec) -> SymmetryClass:
    """Classify a parsed model (exact tier, ``L <= 3``)."""
    liou = build_liouvillian(spec)
    return classify_operators(liou.H, liou.jumps, liou.ops.N, liou.matrix)


def predict(cls: SymmetryClass | Symmetry | str) -> dict:
    """Conservation pattern expected for each class."""
    label = Symmetry(cls.label if isinstance(cls, SymmetryClass) else cls)
    table = {
        Symmetry.STRONG: (True, True, True),
        Symmetry.WEAK: (False, True, True),
        Symmetry.NONE: (False, False, False),
    }
    n, o, g = table[label]
    return {"N_conserved": n, "ON_conserved": o, "gauge_invariant": g}


def adjoint_on_N(liou: Liouvillian) -> float:
    """Norm of the adjoint Liouvillian applied to ``N`` (zero under strong symmetry)."""
    N = liou.ops.N
    out = 1j * (liou.H @ N - N @ liou.H)
    for g, L in liou.jumps:
        Ld = L.conj().T
        out = out + g * (Ld @ N @ L - 0.5 * (Ld @ L @ N + N @ Ld @ L))
    return _fro(out)


def off_block_norm(liou: Liouvillian) -> float:
    """Norm of Liouvillian entries coupling different eigenvalues of the phase generator."""
    q = phase_generator(liou.ops.N).diagonal().real
    M = liou.matrix.tocoo()
    mask = q[M.row] != q[M.col]
    return float(np.linalg.norm(M.data[mask]))


def _status(drift: float) -> str:
    if drift < CONSERVED_TOL:
        return "conserved"
    if drift > BROKEN_TOL:
        return "broken"
    return "inconclusive"


def default_initial_state(L: int, seed: int = 0) -> np.ndarray:
    """Seeded random state restricted to number blocks (commutes with N)."""
    rng = np.random.default_rng(seed)
    return number_block_part(random_density_matrix(4 ** L, rng))


def verify_by_simulation(spec: ModelSpec, rho0: np.ndarray | None = None, T: float | None = None,
                         dt: float = 0.05, seed: int = 0) -> dict:
    """Simulate and compare drifts of ``N`` and ``O_N`` with :func:`predict`.

    A drift below 1e-7 counts as conserved and above 1e-3 as broken;
    anything in between is reported as inconclusive.

    Returns
    -------
    dict
        ``{class, commutator_norms, prediction, simulation: {N_drift, ON_drift,
        N_status, ON_status, verdict, mismatches}}``
    """
    cls = classify(spec)
    pred = predict(cls)
    if rho0 is None:
        rho0 = default_initial_state(spec.num_sites, seed)
    if T is None:
        rates = [d.rate for d in spec.dissipators if d.rate > 0]
        T = 10.0 / max(rates) if rates else 10.0
    T = dt * round(T / dt)
    traj = evolve(build_liouvillian(spec), rho0, T, dt)
    o = traj.observables
    n_drift = float(np.max(np.abs(o["N"] - o["N"][0])))
    on_drift = float(np.max(np.abs(o["ON_direct"] - o["ON_direct"][0])))
    status = {"N": _status(n_drift), "ON": _status(on_drift)}
    expected = {"N": pred["N_conserved"], "ON": pred["ON_conserved"]}
    mismatches = []
    inconclusive = []
    for k in ("N", "ON"):
        if status[k] == "inconclusive":
            inconclusive.append(k)
        elif (status[k] == "conserved") != expected[k]:
            mismatches.append(k)
    verdict = "mismatch" if mismatches else "inconclusive" if inconclusive else "match"
    return {
        "class": cls.label.value,
        "commutator_norms": cls.norms,
        "prediction": pred,
        "simulation": {
            "T": T,
            "N_drift": n_drift,
            "ON_drift": on_drift,
            "N_status": status["N"],
            "ON_status": status["ON"],
            "verdict": verdict,
            "mismatches": mismatches,
        },
    }
