import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pesinlab.cocycle import cocycle_product
from pesinlab.systems import (
    InvalidSystem,
    SmoothSystem,
    apply_map,
    block,
    cat_map,
    check_volume_preserving,
    finite_difference_jacobian,
    identity,
    inverse_system,
    linear_automorphism,
    make_system,
    perturbed_cat,
    rotation,
    sample_lebesgue,
    standard_map,
    torus_distance,
    torus_point,
    wrap,
)

BUILTINS = {
    "cat": cat_map(),
    "golden": linear_automorphism([[1, 1], [1, 0]]),
    "perturbed": perturbed_cat(0.05),
    "rotation": rotation(0.3, 0.7),
    "standard0": standard_map(0.0),
    "standard1": standard_map(1.0),
    "block": block(cat_map(), rotation(0.3)),
    "identity": identity(2),
}


def test_cat_map_jacobian_is_constant():
    s = make_system("cat_map")
    assert s.dim == 2
    pts = sample_lebesgue(0, 20, 2)
    assert np.array_equal(s.jacobian(pts), np.broadcast_to([[2.0, 1.0], [1.0, 1.0]], (20, 2, 2)))


def test_rotation_jacobian_is_identity():
    s = make_system({"name": "rotation", "alphas": [0.3, 0.7]})
    assert np.array_equal(s.jacobian([0.4, 0.9]), np.eye(2))


def test_perturbed_cat_determinant_is_one():
    s = make_system({"name": "perturbed_cat", "epsilon": 0.05})
    dets = np.linalg.det(s.jacobian(sample_lebesgue(11, 10_000, 2)))
    assert np.max(np.abs(np.abs(dets) - 1.0)) < 1e-10


def test_make_system_rejects_bad_descriptors():
    with pytest.raises(InvalidSystem, match=r"\|det\| must be 1"):
        make_system({"name": "linear_automorphism", "matrix": [[2, 1], [1, 2]]})
    with pytest.raises(InvalidSystem, match="integers"):
        make_system({"name": "linear_automorphism", "matrix": [[2.5, 1], [1, 1]]})
    with pytest.raises(InvalidSystem, match="unknown system"):
        make_system({"name": "henon"})
    with pytest.raises(InvalidSystem, match="unknown field"):
        make_system({"name": "perturbed_cat", "epsilon": 0.1, "eps": 2})


def test_descriptor_round_trip_through_json_schema():
    desc = {"name": "block", "systems": [{"name": "cat_map"}, {"name": "rotation", "alphas": [0.3]}]}
    s = make_system(desc)
    assert s.dim == 3
    again = make_system(s.descriptor)
    x = np.array([0.1, 0.2, 0.3])
    assert np.array_equal(s.forward(x), again.forward(x))


@pytest.mark.parametrize(
    "x, steps, expected",
    [
        ((0.0, 0.0), 5, (0.0, 0.0)),
        ((0.5, 0.5), 1, (0.5, 0.0)),
        ((0.5, 0.0), -1, (0.5, 0.5)),
        ((0.3, 0.6), 0, (0.3, 0.6)),
    ],
)
def test_apply_map_cat(x, steps, expected):
    assert torus_distance(apply_map(cat_map(), x, steps), expected) < 1e-12


def test_torus_distance_examples():
    assert torus_distance([0.3, 0.4], [0.3, 0.4]) == 0.0
    assert torus_distance([0.1, 0.1], [0.9, 0.9]) == pytest.approx(np.sqrt(0.08), abs=1e-12)
    assert torus_distance([0.25, 0.0], [0.75, 0.0]) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(ValueError):
        torus_distance([0.1, 0.2], [0.1, 0.2, 0.3])


coords = st.floats(0, 1, exclude_max=True, allow_nan=False)
pts2 = st.tuples(coords, coords)


@given(pts2, pts2, pts2)
def test_torus_distance_is_a_metric(a, b, c):
    assert torus_distance(a, b) == pytest.approx(torus_distance(b, a), abs=1e-15)
    assert torus_distance(a, c) <= torus_distance(a, b) + torus_distance(b, c) + 1e-12
    assert torus_distance(a, b) <= np.sqrt(2) / 2 + 1e-12


@given(st.lists(st.floats(-50, 50, allow_nan=False), min_size=1, max_size=4))
def test_wrap_lands_in_unit_interval(values):
    w = wrap(values)
    assert np.all((w >= 0) & (w < 1))


def test_sample_lebesgue_contract():
    pts = sample_lebesgue(42, 100_000, 2)
    assert np.all((pts[:, :] >= 0) & (pts < 1))
    means = pts.mean(axis=0)
    assert np.all((means >= 0.495) & (means <= 0.505))
    assert np.array_equal(sample_lebesgue(42, 100, 2), sample_lebesgue(42, 100, 2))
    assert not np.array_equal(sample_lebesgue(1, 1, 2), sample_lebesgue(2, 1, 2))
    with pytest.raises(ValueError):
        sample_lebesgue(0, 0, 2)


def test_check_volume_preserving():
    assert check_volume_preserving(cat_map(), 10_000) == 0.0
    assert check_volume_preserving(standard_map(1.0), 10_000) < 1e-10
    stretched = SmoothSystem(
        dim=2,
        lift=lambda x: x @ np.array([[1.1, 0.0], [0.0, 1.0]]).T,
        inverse_lift=lambda x: x @ np.array([[1 / 1.1, 0.0], [0.0, 1.0]]).T,
        jacobian_fn=lambda x: np.broadcast_to(np.diag([1.1, 1.0]), x.shape[:-1] + (2, 2)).copy(),
        descriptor={"name": "det_1.1_stub"},
        volume_preserving=False,
    )
    assert check_volume_preserving(stretched, 100) == pytest.approx(np.log(1.1), abs=1e-12)


def test_singular_jacobian_is_named():
    flat = SmoothSystem(2, lambda x: x, lambda x: x, lambda x: np.zeros(x.shape[:-1] + (2, 2)), {"name": "flat"})
    with pytest.raises(InvalidSystem, match="singular Jacobian at point"):
        check_volume_preserving(flat, 3)


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_round_trip_inverse(name):
    s = BUILTINS[name]
    pts = sample_lebesgue(5, 10_000, s.dim)
    assert np.max(torus_distance(s.inverse(s.forward(pts)), pts)) < 1e-10
    assert np.max(torus_distance(s.forward(s.inverse(pts)), pts)) < 1e-10


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_volume_preservation_claims(name):
    s = BUILTINS[name]
    assert s.volume_preserving
    assert check_volume_preserving(s, 2000, seed=3) < 1e-10


@pytest.mark.parametrize("name", sorted(BUILTINS))
@pytest.mark.parametrize("n", [1, 3, 7])
def test_chain_rule_against_finite_differences(name, n):
    s = BUILTINS[name]
    x = sample_lebesgue(9, 1, s.dim)[0]
    analytic = cocycle_product(s, x, n)
    numeric = finite_difference_jacobian(s, x, n)
    assert np.linalg.norm(analytic - numeric) <= 1e-4 * max(1.0, np.linalg.norm(analytic))


@pytest.mark.parametrize("name", ["cat", "golden", "rotation", "block", "identity"])
def test_linear_systems_have_point_independent_jacobian(name):
    s = BUILTINS[name]
    J = s.jacobian(sample_lebesgue(1, 50, s.dim))
    assert np.array_equal(J, np.broadcast_to(J[0], J.shape))


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_displacement_matches_lift_difference(name):
    s = BUILTINS[name]
    rng = np.random.default_rng(0)
    x = rng.random((50, s.dim))
    h = rng.normal(scale=1e-3, size=(50, s.dim))
    assert np.allclose(s.displacement(x, h), s.lift(x + h) - s.lift(x), atol=1e-12)


def test_inverse_system_undoes_forward():
    s = perturbed_cat(0.05)
    inv = inverse_system(s)
    x = torus_point([0.31, 0.77])
    assert torus_distance(inv.forward(s.forward(x)), x) < 1e-12
    assert np.allclose(inv.jacobian(s.forward(x)) @ s.jacobian(x), np.eye(2), atol=1e-12)


@settings(max_examples=30)
@given(st.integers(-20, 20), st.integers(-20, 20))
def test_apply_map_composes(a, b):
    s = perturbed_cat(0.02)
    x = np.array([0.123, 0.456])
    lhs = apply_map(s, apply_map(s, x, a), b)
    rhs = apply_map(s, x, a + b)
    # chaotic orbits amplify rounding by roughly 2.62 per step
    assert torus_distance(lhs, rhs) < 1e-15 * 2.7 ** (abs(a) + abs(b)) + 1e-12
