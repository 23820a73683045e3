from __future__ import annotations

import math

import numpy as np
import pytest

from topokin.curves import (
    CATALOG,
    NO_SURFACE,
    DomainError,
    cylinder,
    estimate_diameter,
    evaluate_jet,
    make_catalog_trajectory,
    plane,
    sphere,
    torus,
    validate_on_surface,
    validate_smoothness,
)

from oracles import central_difference

CATALOG_CASES = {
    "circle": ([1.0], 0.0, 2 * math.pi),
    "helix": ([1.0, 1.0], 0.0, 2 * math.pi),
    "cubic_line": ([], -1.0, 1.0),
    "double_circle": ([1.0], 0.0, 4 * math.pi),
    "gerono": ([1.0], 0.0, 2 * math.pi),
    "accelerating_circle": ([], 0.0, 2 * math.pi * math.sqrt(2)),
}


def catalog(name):
    params, a, b = CATALOG_CASES[name]
    return make_catalog_trajectory(name, params, a, b)


def test_catalog_cases_cover_catalog():
    assert set(CATALOG_CASES) == set(CATALOG)


def test_circle_jet_at_zero():
    j = evaluate_jet(catalog("circle"), 0.0, 1)
    np.testing.assert_allclose(j.d0, [1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(j.d1, [0, 1, 0], atol=1e-15)


def test_circle_jet_at_pi():
    j = evaluate_jet(catalog("circle"), math.pi, 2)
    np.testing.assert_allclose(j.d0, [-1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(j.d1, [0, -1, 0], atol=1e-15)
    np.testing.assert_allclose(j.d2, [1, 0, 0], atol=1e-15)


def test_cubic_line_stationary_at_zero():
    j = evaluate_jet(catalog("cubic_line"), 0.0, 3)
    for d in (j.d0, j.d1, j.d2):
        np.testing.assert_array_equal(d, 0.0)
    np.testing.assert_array_equal(j.d3, [6, 0, 0])


@pytest.mark.parametrize("t", [0.0, 0.7, 2.0, 5.5])
def test_helix_speed_is_sqrt2(t):
    j = evaluate_jet(catalog("helix"), t, 1)
    assert np.linalg.norm(j.d1) == pytest.approx(math.sqrt(2), rel=1e-15)


def test_helix_second_derivative():
    np.testing.assert_allclose(evaluate_jet(catalog("helix"), 0.0, 2).d2, [-1, 0, 0], atol=1e-15)


def test_order_zero_leaves_derivatives_unavailable():
    traj = catalog("gerono")
    j = evaluate_jet(traj, traj.a, 0)
    assert j.order == 0 and j.d1 is None and j.d2 is None
    np.testing.assert_allclose(j.d0, traj.position(traj.a))


@pytest.mark.parametrize("name", sorted(CATALOG_CASES))
def test_endpoint_jets_available(name):
    traj = catalog(name)
    for t in (traj.a, traj.b):
        j = evaluate_jet(traj, t, 3)
        assert all(np.all(np.isfinite(d)) for d in (j.d0, j.d1, j.d2, j.d3))


@pytest.mark.parametrize("name", sorted(CATALOG_CASES))
def test_jets_match_finite_differences(name):
    traj = catalog(name)
    rng = np.random.default_rng(11)
    h = 1e-4
    ts = rng.uniform(traj.a + h, traj.b - h, 100)
    d = traj.derivatives(ts, 3)
    d0 = lambda s: traj.derivatives(s, 0)[0]
    d1 = lambda s: traj.derivatives(s, 1)[1]
    d2 = lambda s: traj.derivatives(s, 2)[2]
    for k, fn in ((1, d0), (2, d1), (3, d2)):
        err = np.abs(d[k] - central_difference(fn, ts, h))
        scale = np.linalg.norm(d[k], axis=-1, keepdims=True) + 1
        assert np.all(err <= 1e-6 * scale), (name, k, err.max())


def test_evaluation_outside_domain_raises():
    traj = catalog("circle")
    with pytest.raises(DomainError):
        evaluate_jet(traj, -1e-9, 0)
    with pytest.raises(DomainError):
        traj.position(7.0)


def test_order_above_max_raises():
    with pytest.raises(ValueError):
        evaluate_jet(catalog("circle"), 0.0, 4)


@pytest.mark.parametrize("name, params, a, b", [
    ("spiral", [], 0, 1),
    ("circle", [], 0, 1),
    ("helix", [1], 0, 1),
    ("circle", [1], 1, 1),
    ("circle", [1], 2, 1),
])
def test_catalog_errors(name, params, a, b):
    with pytest.raises(ValueError):
        make_catalog_trajectory(name, params, a, b)


def test_circle_on_unit_sphere():
    rep = validate_on_surface(catalog("circle"), sphere(1.0), 1000, 1e-9)
    assert rep.passed and rep.max_residual < 1e-15 and rep.samples_checked == 1000


def test_circle_off_radius_two_sphere():
    rep = validate_on_surface(catalog("circle"), sphere(2.0), 1000, 1e-9)
    assert not rep.passed
    assert rep.max_residual == pytest.approx(3.0, abs=1e-12)


def test_helix_on_cylinder():
    assert validate_on_surface(catalog("helix"), cylinder(1.0), 1000, 1e-9).passed


@pytest.mark.parametrize("R", [0.5, 1.0, 2.0])
def test_scaled_circle_on_scaled_sphere(R):
    traj = make_catalog_trajectory("circle", [R], 0, 2 * math.pi)
    assert validate_on_surface(traj, sphere(R), 1000, 1e-12).passed


def test_other_surfaces():
    circle = catalog("circle")
    assert validate_on_surface(circle, plane(0.0), 200, 1e-12).passed
    assert not validate_on_surface(circle, plane(0.5), 200, 1e-12).passed
    assert validate_on_surface(circle, NO_SURFACE, 200, 1e-12).passed
    big = make_catalog_trajectory("circle", [3.0], 0, 2 * math.pi)
    assert validate_on_surface(big, torus(2.0, 1.0), 200, 1e-12).passed
    assert not validate_on_surface(circle, torus(2.0, 0.5), 200, 1e-12).passed


def test_offcentre_sphere():
    assert not validate_on_surface(catalog("circle"), sphere(1.0, (0, 0, 1)), 100, 1e-9).passed
    assert validate_on_surface(catalog("circle"), sphere(math.sqrt(2), (0, 0, 1)), 100, 1e-12).passed


@pytest.mark.parametrize("name", ["circle", "cubic_line", "gerono", "helix"])
def test_smoothness_passes_on_catalog(name):
    rep = validate_smoothness(catalog(name), 200, 1e-4, 1e-6)
    assert rep.passed, rep.messages


def test_smoothness_detects_wrong_derivative():
    from topokin.curves import Trajectory

    def bad(t, order):
        t = np.asarray(t, float)
        z = np.zeros(t.shape)
        pos = np.stack([t * t, z, z], -1)
        vel = np.stack([t, z, z], -1)  # should be 2t
        acc = np.stack([np.ones_like(t), z, z], -1)
        return [pos, vel, acc, np.zeros(t.shape + (3,))][: order + 1]

    rep = validate_smoothness(Trajectory(0.0, 1.0, bad), 50, 1e-4, 1e-6)
    assert not rep.passed


def test_smoothness_short_domain():
    traj = make_catalog_trajectory("circle", [1], 0, 3e-4)
    with pytest.raises(ValueError):
        validate_smoothness(traj, 10, 1e-4, 1e-6)


def test_diameter():
    assert estimate_diameter(catalog("circle")) == pytest.approx(2.0, rel=1e-4)
    assert estimate_diameter(catalog("cubic_line")) == pytest.approx(2.0)
