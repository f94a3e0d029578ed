import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lipshadow.errors import ContractError, InjectivityError
from lipshadow.phase_space import (PhaseSpace, distance, exp_chart, exp_chart_inv, make_system,
                                   orbit_of, SYSTEMS)

TORUS2 = PhaseSpace(2)
TORUS1 = PhaseSpace(1)
unit = st.floats(0, 1, exclude_max=True, allow_nan=False)


def brute_distance(x, y):
    m = len(x)
    return min(np.linalg.norm(np.asarray(y) + np.array(s) - x)
               for s in itertools.product((-1, 0, 1), repeat=m))


@pytest.mark.parametrize("space, x, y, expected", [
    (TORUS2, [0, 0], [0, 0], 0.0),
    (TORUS1, [0.1], [0.9], 0.2),
    (TORUS2, [0.95, 0.5], [0.05, 0.5], 0.1),
])
def test_distance_examples(space, x, y, expected):
    assert distance(space, x, y) == pytest.approx(expected, abs=1e-14)
    assert brute_distance(np.array(x, float), y) == pytest.approx(expected, abs=1e-14)


def test_dimension_mismatch():
    with pytest.raises(ContractError):
        distance(TORUS2, [0.1], [0.2, 0.3])


@given(arrays(float, 3, elements=unit), arrays(float, 3, elements=unit),
       arrays(float, 3, elements=unit))
def test_torus_metric_properties(x, y, z):
    space = PhaseSpace(3)
    dxy = distance(space, x, y)
    assert dxy == pytest.approx(distance(space, y, x), abs=1e-15)
    assert dxy >= 0
    assert distance(space, x, x) <= 1e-14
    assert dxy <= distance(space, x, z) + distance(space, z, y) + 1e-14
    assert dxy <= np.sqrt(3) / 2 + 1e-15
    assert dxy == pytest.approx(brute_distance(x, y), abs=1e-14)


def test_box_distance_is_euclidean():
    box = PhaseSpace(2, "box", ((-5, 5), (-5, 5)))
    assert distance(box, [0, 0], [3, 4]) == pytest.approx(5.0)
    assert box.injectivity_radius == np.inf


def test_exp_chart_examples():
    x = np.array([0.3, 0.7])
    np.testing.assert_array_equal(exp_chart(TORUS2, x, [0.0, 0.0]), x)
    assert exp_chart(TORUS1, [0.9], [0.2])[0] == pytest.approx(0.1, abs=1e-15)
    with pytest.raises(InjectivityError):
        exp_chart(TORUS1, [0.1], [0.5])


def test_exp_chart_round_trip():
    rng = np.random.default_rng(3)
    for _ in range(100):
        x = rng.uniform(size=2)
        v = rng.uniform(-1, 1, size=2)
        v *= rng.uniform(0, 0.4) / np.linalg.norm(v)
        back = exp_chart_inv(TORUS2, x, exp_chart(TORUS2, x, v))
        np.testing.assert_allclose(back, v, rtol=0, atol=1e-14)


def test_chart_distortion_is_one():
    rng = np.random.default_rng(4)
    for _ in range(50):
        x = rng.uniform(size=2)
        v, w = rng.uniform(-0.2, 0.2, size=(2, 2))
        ratio = distance(TORUS2, exp_chart(TORUS2, x, v), exp_chart(TORUS2, x, w)) / np.linalg.norm(v - w)
        assert ratio == pytest.approx(1.0, abs=1e-12)


def test_catalogue_examples():
    cat = make_system("cat_map")
    np.testing.assert_array_equal(cat.eval([0.0, 0.0]), [0.0, 0.0])
    np.testing.assert_array_equal(cat.jac([0.0, 0.0]), [[2, 1], [1, 1]])
    eig = np.sort(np.linalg.eigvalsh(cat.jac([0.3, 0.1])))
    np.testing.assert_allclose(eig, [(3 - np.sqrt(5)) / 2, (3 + np.sqrt(5)) / 2], rtol=1e-14)
    para = make_system("parabolic_circle", {"a": 0.05})
    assert para.eval([0.0])[0] == 0.0
    assert para.jac([0.0])[0, 0] == 1.0


@pytest.mark.parametrize("name, params", [
    ("nope", {}),
    ("perturbed_cat", {"eps": 0.2}),
    ("parabolic_circle", {"a": 0.5}),
    ("cat_map", {"eps": 0.1}),
    ("linear_box", {"d0": 0.0}),
])
def test_bad_systems(name, params):
    with pytest.raises(ContractError):
        make_system(name, params)


def _fd_jacobian(system, x, h=1e-6):
    m = len(x)
    J = np.empty((m, m))
    for j in range(m):
        e = np.zeros(m)
        e[j] = h
        if system.space.topology == "torus":
            diff = exp_chart_inv(system.space, system.eval(x - e), system.eval(x + e))
        else:
            diff = system.eval(x + e) - system.eval(x - e)
        J[:, j] = diff / (2 * h)
    return J


@pytest.mark.parametrize("name, params", [
    ("cat_map", {}), ("perturbed_cat", {"eps": 0.05}), ("parabolic_circle", {"a": 0.1}),
    ("identity_circle", {}), ("linear_box", {"d0": 2.0, "d1": 0.5}),
])
def test_jacobian_matches_finite_differences(name, params):
    system = make_system(name, params)
    rng = np.random.default_rng(11)
    for _ in range(100):
        x = rng.uniform(size=system.space.dimension)
        J = system.jac(x)
        err = np.linalg.norm(_fd_jacobian(system, x) - J) / np.linalg.norm(J)
        assert err <= 1e-5


def test_torus_maps_stay_in_unit_cube():
    rng = np.random.default_rng(5)
    for name in ("cat_map", "perturbed_cat", "parabolic_circle", "identity_circle"):
        system = make_system(name)
        for x in rng.uniform(size=(50, system.space.dimension)):
            y = system.eval(x)
            assert np.all((0 <= y) & (y < 1))


def test_orbit_examples():
    ident = make_system("identity_circle")
    orbit = orbit_of(ident, [0.3], -5, 5)
    np.testing.assert_array_equal(orbit.points, np.full((11, 1), 0.3))
    cat = make_system("cat_map")
    np.testing.assert_array_equal(orbit_of(cat, [0, 0], -4, 7).points, np.zeros((12, 2)))
    orbit = orbit_of(cat, [0.1, 0.2], 0, 3)
    np.testing.assert_allclose(orbit[1], [0.4, 0.3], atol=1e-15)
    assert orbit[0].tolist() == [0.1, 0.2]


@pytest.mark.parametrize("name", ["cat_map", "perturbed_cat", "parabolic_circle"])
def test_orbit_invariant_with_negative_times(name):
    system = make_system(name)
    rng = np.random.default_rng(8)
    p = rng.uniform(size=system.space.dimension)
    orbit = orbit_of(system, p, -15, 15)
    assert orbit.max_defect() <= 1e-12
    np.testing.assert_array_equal(orbit[0], p)


def test_orbit_window_must_contain_zero():
    with pytest.raises(ContractError):
        orbit_of(make_system("cat_map"), [0.1, 0.1], 1, 5)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(sorted(SYSTEMS)), st.integers(0, 2**32 - 1))
def test_orbit_recomputation(name, seed):
    system = make_system(name)
    p = np.random.default_rng(seed).uniform(size=system.space.dimension)
    orbit = orbit_of(system, p, 0, 20)
    for k in range(20):
        assert distance(system.space, orbit[k + 1], system.eval(orbit[k])) <= 1e-12
