import numpy as np
import pytest
from scipy.optimize import minimize

from lipshadow._rng import stream, uniform_ball
from lipshadow.cocycle import along_orbit
from lipshadow.errors import ContractError, SmallnessError
from lipshadow.linear_analysis import solve_bounded
from lipshadow.phase_space import Pseudotrajectory, distance, exp_chart_inv, make_system, orbit_of
from lipshadow.shadowing import (CHECK_NAMES, WPattern, extract_limit, lemma2_pseudotrajectory,
                                 lipschitz_estimate, random_pseudotrajectory, replay_lemma2, shadow)

CAT = make_system("cat_map")
A = np.array([[2.0, 1.0], [1.0, 1.0]])


def test_pseudotrajectory_determinism_and_defect():
    a = random_pseudotrajectory(CAT, [0.1, 0.2], 1e-3, 0, 500, seed=3)
    b = random_pseudotrajectory(CAT, [0.1, 0.2], 1e-3, 0, 500, seed=3)
    np.testing.assert_array_equal(a.points, b.points)
    assert 0.5e-3 <= a.max_defect(CAT) <= 1e-3
    c = random_pseudotrajectory(CAT, [0.1, 0.2], 1e-3, 0, 500, seed=4)
    assert not np.array_equal(a.points, c.points)


def test_zero_defect_is_an_orbit():
    pseudo = random_pseudotrajectory(CAT, [0.1, 0.2], 0.0, 0, 30, seed=0)
    assert pseudo.max_defect(CAT) <= 1e-12
    orbit, rep = shadow(CAT, pseudo)
    assert rep.converged and rep.newton_iters == 1 and rep.l_empirical == 0.0


def test_pseudotrajectory_contracts():
    with pytest.raises(ContractError):
        random_pseudotrajectory(CAT, [0.1, 0.2], 0.6, 0, 10, seed=0)
    with pytest.raises(ContractError):
        random_pseudotrajectory(CAT, [0.1, 0.2], 1e-3, 5, 5, seed=0)
    with pytest.raises(ContractError):
        random_pseudotrajectory(CAT, [0.1, 0.2], 1e-3, 0, 5, seed=0, noise="pink")


def test_upstream_noise_respects_defect():
    para = make_system("parabolic_circle", {"a": 0.05})
    pseudo = random_pseudotrajectory(para, [0.0], 1e-4, 0, 300, seed=1, noise="upstream")
    assert pseudo.max_defect(para) <= 1e-4


def _best_orbit_constant(pseudo, d, centre):
    """Smallest sup distance over true cat orbits, parametrised by the point at ``centre``."""
    x = pseudo.points

    def cost(u):
        y0 = x[centre] + d * u
        worst = 0.0
        for k in range(len(x)):
            M = np.linalg.matrix_power(A, k - centre) if k >= centre else \
                np.round(np.linalg.matrix_power(np.linalg.inv(A), centre - k))
            worst = max(worst, np.linalg.norm(exp_chart_inv(CAT.space, x[k], M @ y0 % 1.0)))
        return worst / d

    return cost


def test_shadow_cat_against_brute_force():
    d = 1e-4
    pseudo = random_pseudotrajectory(CAT, [0.3, 0.6], d, 0, 20, seed=9)
    orbit, rep = shadow(CAT, pseudo)
    assert rep.converged and rep.l_empirical <= 2.0
    cost = _best_orbit_constant(pseudo, d, 10)
    u0 = exp_chart_inv(CAT.space, pseudo.points[10], orbit[10]) / d
    assert cost(u0) == pytest.approx(rep.l_empirical, rel=1e-6)
    best = minimize(cost, u0, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12}).fun
    assert best <= rep.l_empirical + 1e-9
    # the minimal-norm step is not the minimax orbit, but it is close to it
    assert rep.l_empirical <= 2 * best + 1e-3


def test_shadow_cat_long_window():
    pseudo = random_pseudotrajectory(CAT, [0.3, 0.6], 1e-4, 0, 300, seed=2)
    orbit, rep = shadow(CAT, pseudo)
    assert rep.converged and rep.l_empirical <= 2.0
    assert orbit.max_defect() <= 1e-12


def test_shadow_failure_is_reported():
    pseudo = random_pseudotrajectory(CAT, [0.3, 0.6], 1e-3, 0, 50, seed=2)
    orbit, rep = shadow(CAT, pseudo, max_iter=1)
    assert orbit is None and not rep.converged
    assert rep.newton_iters == 1 and rep.residual > 1e-12


@pytest.mark.parametrize("window", [20, 80, 200])
def test_identity_drift_constant_grows_with_window(window):
    ident = make_system("identity_circle")
    d = 1e-4
    pts = (0.2 + 0.9 * d * np.arange(window + 1)).reshape(-1, 1)
    orbit, rep = shadow(ident, Pseudotrajectory(ident.space, 0, pts, d))
    # the closest constant orbit sits at the midpoint of the drift
    assert rep.converged
    assert rep.l_empirical == pytest.approx(0.45 * window, rel=1e-8)


def test_lipschitz_estimate_identity_random_walk():
    ident = make_system("identity_circle")
    small = lipschitz_estimate(ident, [0.2], 20, [1e-3], 10, 0)
    large = lipschitz_estimate(ident, [0.2], 320, [1e-3], 10, 0)
    assert large.rows[0].l_max >= 2 * small.rows[0].l_max


def test_lipschitz_grid_must_descend():
    with pytest.raises(ContractError):
        lipschitz_estimate(CAT, [0.1, 0.2], 10, [1e-4, 1e-3], 1, 0)


def test_lipschitz_seed_reproducible():
    a = lipschitz_estimate(CAT, [0.1, 0.2], 50, [1e-3, 1e-4], 3, 5)
    b = lipschitz_estimate(CAT, [0.1, 0.2], 50, [1e-3, 1e-4], 3, 5)
    assert a == b
    assert a.d0 == 1e-3


def test_lemma2_lift_by_hand():
    orbit = orbit_of(CAT, [0.0, 0.0], -2, 3)
    w = np.tile([0.9, 0.0], (5, 1))
    pseudo, delta = lemma2_pseudotrajectory(CAT, orbit, w, 1e-3, 2)
    np.testing.assert_allclose(delta[0], [0, 0])
    np.testing.assert_allclose(delta[1], [0.9, 0.0])
    np.testing.assert_allclose(delta[2], [2.7, 0.9])
    assert pseudo.max_defect(CAT) <= 2e-3


def test_lemma2_zero_w_returns_orbit():
    orbit = orbit_of(CAT, [0.2, 0.7], -4, 5)
    pseudo, delta = lemma2_pseudotrajectory(CAT, orbit, np.zeros((9, 2)), 1e-3, 4)
    np.testing.assert_allclose(pseudo.points, orbit.points, atol=1e-14)
    assert not delta.any()


def test_lemma2_smallness():
    orbit = orbit_of(CAT, [0.2, 0.7], -4, 5)
    w = np.tile([0.9, 0.0], (9, 1))
    with pytest.raises(SmallnessError) as info:
        lemma2_pseudotrajectory(CAT, orbit, w, 0.1, 4)
    assert info.value.d_max < 0.1
    with pytest.raises(ContractError):
        lemma2_pseudotrajectory(CAT, orbit, np.ones((9, 2)), 1e-6, 4)


def test_replay_zero_w():
    rep = replay_lemma2(CAT, [0.2, 0.7], np.zeros((11, 2)), 5, 2.0)
    assert rep.passed
    assert np.abs(rep.z).max() <= 1e-12


def test_replay_cat_matches_bounded_solution():
    n = 20
    rng = stream(7, 0)
    p = rng.uniform(size=2)
    w = uniform_ball(rng, 2 * n + 1, 2, 0.9)
    rep = replay_lemma2(CAT, p, w, n, 2.0)
    assert rep.passed, rep.message
    assert [c.name for c in rep.checks] == list(CHECK_NAMES)
    # independent construction: minimal-norm bounded solution on a much wider window
    wide = 60
    orbit = orbit_of(CAT, p, -wide, wide + 1)
    c = along_orbit(CAT, orbit)
    w_wide = np.zeros((2 * wide + 1, 2))
    w_wide[wide - n: wide + n + 1] = w
    v = solve_bounded(c, w_wide).v
    z = rep.z[-n - rep.k_min: n + 2 - rep.k_min]
    np.testing.assert_allclose(z[5:-5], v[wide - n + 5: wide + n + 2 - 5], atol=1e-6)


def test_replay_parabolic_fails():
    para = make_system("parabolic_circle", {"a": 0.05})
    rep = replay_lemma2(para, [0.0], np.full((21, 1), 0.9), 10, 2.0)
    assert not rep.passed


def test_replay_contracts():
    with pytest.raises(ContractError):
        replay_lemma2(CAT, [0.1, 0.1], np.zeros((5, 2)), 5, 2.0)
    with pytest.raises(ContractError):
        replay_lemma2(CAT, [0.1, 0.1], np.zeros((11, 2)), 5, -1.0)


def test_wpattern():
    pat = WPattern("periodic", values=((0.1, 0.2), (0.3, 0.0)), dimension=2)
    assert pat(0).tolist() == [0.1, 0.2] and pat(3).tolist() == [0.3, 0.0]
    rnd = WPattern("random", seed=4, dimension=2)
    np.testing.assert_array_equal(rnd.window(5)[5:8], rnd.window(10)[10:13])
    with pytest.raises(ContractError):
        WPattern("constant", values=((1.0, 0.0),), dimension=2)


def test_extract_limit_cat():
    pat = WPattern("periodic", values=((0.5, 0.1), (-0.2, 0.6), (0.0, -0.8)), dimension=2)
    rep = extract_limit(CAT, [0.0, 0.0], pat, [10, 20, 40], 2.0)
    assert rep.passed
    assert rep.changes[-1] <= 1e-6
    assert rep.sup_norm <= 17 and rep.residual <= 1e-8
