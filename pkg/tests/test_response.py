import numpy as np
import pytest

from opengauge.meanfield import init_bcs, make_grid
from opengauge.response import (TAU0, TAU1, TAU2, TAU3, NambuGreens, SingularPointError, density_from_greens,
                                gauge_sweep, greens, keldysh_action, occupation_by_residues, response_current,
                                transverse_projector, wt_sweep, wt_vertex_check, wt_vertex_lhs, wt_vertex_rhs)


def random_points(rng, n):
    for _ in range(n):
        delta = rng.uniform(0.01, 1)
        yield rng.uniform(-2, 2), rng.uniform(-2, 2), delta, rng.uniform(0, 10 * delta)


def test_free_limit():
    eps, gn = 0.4, 1e-9
    G = greens(0.1, eps, 0.0, gn)
    assert abs(G[0, 1]) == 0 and abs(G[1, 0]) == 0
    a = 0.1 + 0.5j * gn
    assert abs(G[0, 0] - 1 / (a - eps)) < 1e-12
    assert abs(G[1, 1] - 1 / (a + eps)) < 1e-12
    # diverging as omega approaches +-eps
    assert abs(greens(eps + 1e-6, eps, 0.0, gn)[0, 0]) > 1e5
    assert abs(greens(-eps + 1e-6, eps, 0.0, gn)[1, 1]) > 1e5


def test_pole_guard():
    with pytest.raises(SingularPointError):
        greens(0.5, 0.3, 0.4, 0.0)


def test_retarded_is_inverse_of_kernel():
    rng = np.random.default_rng(0)
    for w, e, d, g in random_points(rng, 200):
        a = w + 0.5j * g
        Ginv = a * TAU0 - e * TAU3 - d * TAU1
        assert np.abs(greens(w, e, d, g) - np.linalg.inv(Ginv)).max() < 1e-10


def test_keldysh_identities():
    rng = np.random.default_rng(1)
    for w, e, d, g in random_points(rng, 300):
        GR = greens(w, e, d, g, "R")
        GA = greens(w, e, d, g, "A")
        GL = greens(w, e, d, g, "<")
        GT = greens(w, e, d, g, "T")
        GTt = greens(w, e, d, g, "Tt")
        assert np.abs(GA - GR.conj().T).max() < 1e-12
        assert np.abs(GT - GL - GR).max() < 1e-12
        assert np.abs(GTt - GL + GA).max() < 1e-12
        # independent oracle: blocks of the inverted contour action
        M = np.linalg.inv(keldysh_action(w, e, d, g))
        scale = max(1.0, np.abs(M).max())
        assert np.abs(M[:2, :2] - GT).max() < 1e-10 * scale
        assert np.abs(M[:2, 2:] - GL).max() < 1e-10 * scale
        assert np.abs(M[2:, 2:] - GTt).max() < 1e-10 * scale


def test_evaluator_object():
    G = NambuGreens(0.3, 0.1)
    k = np.array([0.2, 0.5, -0.1])
    assert np.array_equal(G(0.2, k, "<"), greens(0.2, G.eps(k), 0.3, 0.1, "<"))
    with pytest.raises(ValueError):
        greens(0.2, 0.1, 0.3, 0.1, "X")


def test_wt_no_gap():
    lhs = wt_vertex_lhs(0.3, 0.0, 0.2, 0.7, 0.0, 0.05)
    assert np.abs(lhs - 0.5 * TAU0).max() < 1e-14
    # away from q0 = 0 the identity picks up -q0 tau3
    lhs = wt_vertex_lhs(0.3, 0.2, 0.2, 0.7, 0.0, 0.05)
    assert np.abs(lhs - (0.5 * TAU0 - 0.2 * TAU3)).max() < 1e-14


def test_wt_zero_momentum_transfer():
    # q = 0: (a - eps t3 - D t1) t3 - t3 (a - eps t3 - D t1) = -D [t1, t3] = 2 i D t2
    for d in (0.1, 0.5):
        lhs = wt_vertex_lhs(0.4, 0.0, 0.3, 0.3, d, 0.2)
        assert np.abs(lhs - 2j * d * TAU2).max() < 1e-14
        assert np.abs(lhs).max() > 0


def test_wt_random_sweep():
    res = wt_sweep(1000, np.random.default_rng(2))
    assert res.max() < 1e-12
    assert wt_vertex_check([0.1, 0, 0], [0.2, 0, 0], 0.3, 0.5, 0.2, 2.0) < 1e-12
    assert np.array_equal(wt_vertex_rhs(0.0, 0.1, 0.1, 0.0), np.zeros((2, 2)))


def test_response_current_examples():
    n, m = 0.7, 1.3
    dJ, dJ0 = response_current([1, 0, 0], [0, 1, 0], n, m)
    assert dJ0 == 0
    assert np.allclose(dJ, [0, -n / m, 0], atol=1e-15)
    dJ, _ = response_current([1, 2, 3], [2, 4, 6], n, m)
    assert np.abs(dJ).max() < 1e-15
    with pytest.raises(ZeroDivisionError):
        response_current([0, 0, 0], [1, 0, 0], n, m)
    P = transverse_projector([0.3, -1, 2])
    assert np.abs(P @ P - P).max() < 1e-15 and np.abs(P - P.T).max() == 0


def test_gauge_invariance_sweep():
    shift, trans = gauge_sweep(1000, np.random.default_rng(3))
    assert shift < 1e-14
    assert trans < 1e-14


def test_density_limits():
    grid = make_grid()
    fermi_sea = 2 * grid.w[grid.eps < 0].sum()
    assert density_from_greens(0.0, 0.5, grid) == pytest.approx(fermi_sea, rel=1e-14)
    assert density_from_greens(1e-9, 0.5, grid) == pytest.approx(fermi_sea, rel=1e-6)
    assert density_from_greens(1e-9, -0.5, grid) < 1e-15


def test_density_matches_bcs_occupations():
    grid = make_grid()
    rng = np.random.default_rng(4)
    for _ in range(5):
        d, mu = rng.uniform(0.01, 0.3), rng.uniform(0.1, 1.5)
        st = init_bcs(d, mu, grid)
        ref = 2 * np.sum(st.w * np.abs(st.v) ** 2)
        assert abs(density_from_greens(d, mu, grid) - ref) < 1e-10


def test_residue_occupation_closed_form():
    eps = np.linspace(-2, 2, 11)
    assert np.abs(occupation_by_residues(eps, 0.3) - (1 - eps / np.hypot(eps, 0.3))).max() < 1e-15
