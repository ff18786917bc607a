import os

import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp

from opengauge.fock import build_site_ops, random_density_matrix
from opengauge.lindblad import build_liouvillian
from opengauge.opspec import load_model
from opengauge.symmetry import (Symmetry, adjoint_on_N, classify, classify_operators, off_block_norm, predict,
                                verify_by_simulation)

EXPECTED = {"dephasing": Symmetry.STRONG, "two_body_loss": Symmetry.WEAK, "pair_jump": Symmetry.NONE,
            "hubbard_closed": Symmetry.STRONG, "chain3_loss": Symmetry.WEAK}


def model(models_dir, name):
    return load_model(os.path.join(models_dir, name + ".lgm"))


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_classify_models(models_dir, name):
    cls = classify(model(models_dir, name))
    assert cls.label is EXPECTED[name]
    n = cls.norms
    if cls.label is not Symmetry.NONE:
        assert n["superoperator"] < 1e-10
    else:
        assert n["superoperator"] > 1e-3
    if name == "two_body_loss":
        assert n["H_N"] < 1e-10 and all(x > 0.1 for x in n["L_N"])


def test_predict_table():
    assert predict(Symmetry.STRONG) == {"N_conserved": True, "ON_conserved": True, "gauge_invariant": True}
    assert predict("Weak") == {"N_conserved": False, "ON_conserved": True, "gauge_invariant": True}
    assert predict(Symmetry.NONE) == {"N_conserved": False, "ON_conserved": False, "gauge_invariant": False}


def _gaussian_unitary(L, rng):
    ops = build_site_ops(L)
    modes = [(r, s) for r in range(L) for s in ("up", "dn")]
    h = rng.normal(size=(2 * L, 2 * L)) + 1j * rng.normal(size=(2 * L, 2 * L))
    h = h + h.conj().T
    K = sum(h[a, b] * (ops.cdag(*modes[a]) @ ops.c(*modes[b])) for a in range(2 * L) for b in range(2 * L))
    return sla.expm(-1j * K.toarray())


@pytest.mark.parametrize("name", ["dephasing", "two_body_loss", "pair_jump"])
def test_classification_is_basis_independent(models_dir, name):
    liou = build_liouvillian(model(models_dir, name))
    V = _gaussian_unitary(2, np.random.default_rng(0))
    N = liou.ops.N
    assert np.abs(V @ N.toarray() - N.toarray() @ V).max() < 1e-10
    Vd = V.conj().T
    H = sp.csr_matrix(V @ liou.H.toarray() @ Vd)
    jumps = [(g, sp.csr_matrix(V @ L.toarray() @ Vd)) for g, L in liou.jumps]
    assert classify_operators(H, jumps, N).label is EXPECTED[name]


def test_strong_implies_adjoint_annihilates_N(models_dir):
    liou = build_liouvillian(model(models_dir, "dephasing"))
    assert adjoint_on_N(liou) < 1e-10
    assert adjoint_on_N(build_liouvillian(model(models_dir, "two_body_loss"))) > 0.1


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_weak_iff_block_diagonal(models_dir, name):
    liou = build_liouvillian(model(models_dir, name))
    weak = classify(model(models_dir, name)).label is not Symmetry.NONE
    assert (off_block_norm(liou) < 1e-10) == weak


def test_strong_never_without_weak():
    # H commutes with N but the jump is built to fail both tests
    ops = build_site_ops(1)
    H = ops.N
    L = ops.c(0, "up") + ops.cdag(0, "up")
    cls = classify_operators(H, [(0.3, L)], ops.N)
    assert cls.label is Symmetry.NONE


def test_verify_weak_block_state(models_dir):
    rep = verify_by_simulation(model(models_dir, "two_body_loss"))
    sim = rep["simulation"]
    assert rep["class"] == "Weak"
    assert sim["ON_drift"] < 1e-7 and sim["N_drift"] > 1e-3
    assert sim["verdict"] == "match"


def test_verify_strong(models_dir):
    sim = verify_by_simulation(model(models_dir, "dephasing"))["simulation"]
    assert sim["N_drift"] < 1e-7 and sim["ON_drift"] < 1e-7
    assert sim["verdict"] == "match"


def test_verify_none(models_dir):
    rho0 = random_density_matrix(16, np.random.default_rng(1))
    rep = verify_by_simulation(model(models_dir, "pair_jump"), rho0)
    assert rep["class"] == "None"
    assert rep["simulation"]["ON_drift"] > 1e-3
    assert rep["simulation"]["verdict"] == "match"


def test_verify_reports_inconclusive(models_dir):
    # a number-block start under the pair jump only builds up tiny coherences
    rep = verify_by_simulation(model(models_dir, "pair_jump"))
    assert rep["simulation"]["ON_status"] == "inconclusive"
    assert rep["simulation"]["verdict"] == "inconclusive"
