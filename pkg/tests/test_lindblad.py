import warnings

import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp

from opengauge.fock import CapacityError, build_site_ops, fock_state, number_block_part, pure_state, random_density_matrix
from opengauge.lindblad import (CSV_HEADER, build_liouvillian, continuity_residual, evolve, from_operators,
                                observable_N, observable_ON_direct, observable_ON_swap, observable_ON_vectorized,
                                trajectory_csv)
from opengauge.opspec import ModelSpec, parse_model

LOSS2 = """
[lattice]
sites = {L}
[hamiltonian]
J = 1
U = 4
mu = 2
[dissipators]
loss[r]: {g} * c(r,dn)*c(r,up)
"""


def loss_model(L=2, g=0.2):
    return parse_model(LOSS2.format(L=L, g=g))


def closed_model(L=2):
    return ModelSpec(L, 1.0, 4.0, 2.0)


def single_site_loss(g):
    ops = build_site_ops(1)
    L = ops.c(0, "dn") @ ops.c(0, "up")
    return from_operators(sp.csr_matrix((4, 4)), [(g, L)], 1)


def cat_state():
    psi = np.zeros(4)
    psi[0] = psi[3] = 1
    return pure_state(psi)


def test_trace_and_hermiticity_preservation():
    liou = build_liouvillian(loss_model())
    rng = np.random.default_rng(0)
    for _ in range(100):
        rho = random_density_matrix(16, rng)
        out = liou.apply(rho)
        assert abs(np.trace(out)) < 1e-12
    X = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
    assert np.abs(liou.apply(X.conj().T).conj().T - liou.apply(X)).max() < 1e-12


def test_closed_system_is_unitary():
    liou = build_liouvillian(closed_model())
    rho0 = random_density_matrix(16, np.random.default_rng(1))
    H = liou.H.toarray()
    assert np.abs(liou.apply(rho0) - (-1j) * (H @ rho0 - rho0 @ H)).max() < 1e-13
    traj = evolve(liou, rho0, 5.0, 0.05)
    purity = np.einsum("tij,tji->t", traj.states, traj.states).real
    energy = np.einsum("ij,tji->t", H, traj.states).real
    assert np.ptp(purity) < 1e-9
    assert np.ptp(energy) < 1e-9
    assert np.ptp(traj.observables["N"]) < 1e-9


def test_single_site_loss_rate_equation():
    g = 0.3
    traj = evolve(single_site_loss(g), fock_state(3, 1), 5.0, 0.05)
    # P(doublon) obeys dP/dt = -g P, so <N> = 2 exp(-g t)
    assert np.abs(traj.observables["N"] - 2 * np.exp(-g * traj.times)).max() < 1e-9


def test_T_zero_returns_initial_state():
    rho0 = random_density_matrix(16, np.random.default_rng(2))
    traj = evolve(build_liouvillian(loss_model()), rho0, 0.0, 0.1)
    assert len(traj) == 1
    assert np.array_equal(traj.states[0], rho0)


def test_matches_matrix_exponential():
    liou = build_liouvillian(loss_model())
    rho0 = random_density_matrix(16, np.random.default_rng(3))
    T = 2.0
    traj = evolve(liou, rho0, T, 0.1)
    ref = (sla.expm(liou.matrix.toarray() * T) @ rho0.reshape(-1)).reshape(16, 16)
    assert np.abs(traj.states[-1] - ref).max() < 1e-8


def test_input_errors():
    liou = build_liouvillian(loss_model())
    rho0 = np.eye(16) / 16
    with pytest.raises(ValueError):
        evolve(liou, rho0, 1.0, 0.0)
    with pytest.raises(ValueError):
        evolve(liou, rho0, 1.0, 0.3)
    with pytest.raises(ValueError):
        evolve(liou, np.eye(4) / 4, 1.0, 0.1)
    with pytest.raises(CapacityError):
        build_liouvillian(closed_model(4))


# --- O_N --------------------------------------------------------------------

ON_FUNCS = [observable_ON_direct, observable_ON_vectorized, observable_ON_swap]


@pytest.mark.parametrize("f", ON_FUNCS)
def test_ON_examples(f):
    assert abs(f(fock_state(5, 2))) < 1e-15
    assert abs(f(fock_state(0, 1))) < 1e-15
    assert abs(f(cat_state()) + 1) < 1e-12
    assert observable_N(fock_state(0, 1)) == 0


def test_ON_three_way_agreement_and_sign():
    rng = np.random.default_rng(4)
    for L in (1, 2):
        for _ in range(30):
            rho = random_density_matrix(4 ** L, rng, rank=int(rng.integers(1, 4 ** L + 1)))
            vals = [f(rho) for f in ON_FUNCS]
            assert max(vals) - min(vals) < 1e-10
            assert vals[0] < 0
            assert abs(observable_ON_direct(number_block_part(rho))) < 1e-14


def test_ON_bcs_like_superposition():
    ops = build_site_ops(2)
    vac = np.zeros(16)
    vac[0] = 1
    pair0 = (ops.cdag(0, "up") @ ops.cdag(0, "dn")).toarray()
    pair1 = (ops.cdag(1, "up") @ ops.cdag(1, "dn")).toarray()
    u, v = 0.8, 0.6
    I = np.eye(16)
    psi = (u * I + v * pair0) @ (u * I + v * pair1) @ vac
    rho = pure_state(psi)
    # for a product of pair superpositions, Var(N) = sum_r 4 u^2 v^2 and O_N = -Var(N)
    assert abs(observable_ON_direct(rho) + 2 * 4 * u ** 2 * v ** 2) < 1e-12
    assert abs(observable_ON_swap(rho) - observable_ON_direct(rho)) < 1e-10


def test_swap_capacity():
    with pytest.raises(CapacityError):
        observable_ON_swap(np.eye(256) / 256)


def test_weak_symmetry_block_state_keeps_ON_zero():
    liou = build_liouvillian(loss_model())
    rho0 = number_block_part(random_density_matrix(16, np.random.default_rng(5)))
    traj = evolve(liou, rho0, 50.0, 0.05)
    o = traj.observables
    assert np.abs(o["ON_direct"]).max() < 1e-9
    assert np.all(np.diff(o["N"]) <= 1e-12)
    assert np.abs(o["ON_direct"] - o["ON_vec"]).max() < 1e-10
    assert np.abs(o["ON_direct"] - o["ON_swap"]).max() < 1e-10


def test_generic_state_ON_decays_under_loss():
    # single site, H = 0, rho0 = |cat><cat|: the 0-2 coherence decays as exp(-g t/2),
    # so O_N(t) = -exp(-g t), not a constant
    g = 0.4
    traj = evolve(single_site_loss(g), cat_state(), 5.0, 0.05)
    assert np.abs(traj.observables["ON_direct"] + np.exp(-g * traj.times)).max() < 1e-9


# --- continuity -------------------------------------------------------------


def _residual_until(spec, rho0, T, target, dt=0.02, max_halvings=6):
    liou = build_liouvillian(spec)
    for _ in range(max_halvings):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = continuity_residual(evolve(liou, rho0, T, dt), spec)
        r = float(res.max_per_site.max())
        if r < target:
            return r, dt
        dt /= 2
    return r, dt


def test_continuity_closed_chain():
    rho0 = random_density_matrix(64, np.random.default_rng(6))
    r, _ = _residual_until(closed_model(3), rho0, 0.2, 1e-8, dt=0.005)
    assert r < 1e-8


def test_continuity_two_site_loss():
    rho0 = random_density_matrix(16, np.random.default_rng(7))
    r, _ = _residual_until(loss_model(), rho0, 1.0, 1e-7)
    assert r < 1e-7


def test_single_site_doublon_loss_rate():
    g = 0.5
    spec = parse_model(f"[lattice]\nsites = 1\n[dissipators]\nloss: {g} * c(0,dn)*c(0,up)\n")
    liou = build_liouvillian(spec)
    rho0 = random_density_matrix(4, np.random.default_rng(8))
    traj = evolve(liou, rho0, 1.0, 0.1)
    ops = build_site_ops(1)
    d = (ops.n(0, "up") @ ops.n(0, "dn")).toarray()
    for rho in traj.states:
        dn_dt = np.trace(ops.N.toarray() @ liou.apply(rho)).real
        assert abs(dn_dt + 2 * g * np.trace(d @ rho).real) < 1e-13
    # residual with exact derivative would be zero; centered differences get O(dt^2)
    res = continuity_residual(traj, spec)
    assert res.max_per_site.max() < 1e-3


def test_multisite_dissipator_unsupported():
    spec = parse_model("[lattice]\nsites = 2\n[hamiltonian]\nJ = 1\n[dissipators]\nx: 0.1 * c(0,up)*c(1,up)\n")
    traj = evolve(build_liouvillian(spec), np.eye(16) / 16, 0.2, 0.05)
    with pytest.raises(NotImplementedError):
        continuity_residual(traj, spec)


def test_coarse_trajectory_warns():
    spec = loss_model()
    traj = evolve(build_liouvillian(spec), np.eye(16) / 16, 1.0, 0.5)
    with pytest.warns(UserWarning):
        continuity_residual(traj, spec)


def test_csv_export():
    spec = loss_model()
    traj = evolve(build_liouvillian(spec), fock_state(15, 2), 0.2, 0.01)
    text = trajectory_csv(traj, continuity_residual(traj, spec))
    lines = text.strip().split("\n")
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == len(traj) + 1
