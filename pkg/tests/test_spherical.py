import math

import numpy as np
import pytest

from lemni.error_handling import ValidationError
from lemni.spherical import (
    CircleOnSphere,
    SphereOptions,
    SphericalCurve,
    check_theorem2,
    critical_junctions,
    critical_points,
    great_circle_intersections,
    homogeneous_to_sphere,
    inverted_to_sphere,
    mobius,
    plane_to_sphere,
    poincare_length,
    polyline_spherical_length,
    preimage_trace,
    rational_function,
    sample_sphere,
)

TWO_PI = 2 * math.pi


def unit_circle(n):
    return np.exp(2j * np.pi * np.arange(n) / n)


def test_stereographic_projection():
    pts = plane_to_sphere([0, 1, 1j, 1e6])

    assert np.allclose(pts[0], [0, 0, -1])
    assert np.allclose(pts[1], [1, 0, 0])
    assert np.allclose(pts[2], [0, 1, 0])
    assert np.allclose(pts[3], [0, 0, 1], atol=1e-5)
    assert np.allclose(np.linalg.norm(pts, axis=1), 1.0)
    assert np.allclose(inverted_to_sphere([0]), [[0, 0, 1]])


def test_unit_circle_polyline_is_a_great_circle():
    assert abs(polyline_spherical_length(unit_circle(1024), closed=True) - TWO_PI) < 1e-4


def test_diameter_segment_is_half_a_great_circle():
    x = np.linspace(-1, 1, 20001)

    assert abs(polyline_spherical_length(x) - math.pi) < 1e-6


def test_real_axis_through_infinity():
    t = TWO_PI * np.arange(4096) / 4096
    pts = np.column_stack([np.cos(t), np.zeros_like(t), np.sin(t)])

    curve = SphericalCurve.from_sphere_points([pts])

    assert abs(curve.spherical_length - TWO_PI) < 1e-3
    assert curve.chart_switches() >= 2


def test_rational_function_normalises_denominator():
    f = rational_function([2, 4], [2, 2])

    assert np.allclose(f.numerator, [1, 2])
    assert np.allclose(f.denominator, [1, 1])
    assert f.degree == 1


def test_common_root_rejected():
    with pytest.raises(ValidationError, match="share a root"):
        rational_function([-1, 0, 1], [-1, 1])


def test_constant_rejected():
    with pytest.raises(ValidationError, match="non-constant"):
        rational_function([2], [1])


def test_degenerate_mobius_rejected():
    with pytest.raises(ValidationError):
        mobius(1, 2, 2, 4)


def test_circle_kind_validated():
    with pytest.raises(ValidationError):
        CircleOnSphere("ellipse")


def test_critical_points_of_z_squared():
    crit = critical_points(rational_function([0, 0, 1]))

    assert len(crit) == 2
    assert any(np.allclose(c, [0, 0, -1]) for c in crit)
    assert any(np.allclose(c, [0, 0, 1]) for c in crit)


def test_identity_preimage_of_unit_circle():
    curve = preimage_trace(rational_function([0, 1]), CircleOnSphere.circle(0, 1))

    assert curve.component_count == 1
    assert abs(curve.spherical_length - TWO_PI) < 1e-4


def test_square_preimage_of_real_line():
    f = rational_function([0, 0, 1])

    curve = preimage_trace(f, CircleOnSphere.line(math.pi / 2, 0.0))

    assert abs(curve.spherical_length - 2 * TWO_PI) < 1e-3


def test_inversion_preserves_spherical_length():
    C = CircleOnSphere.circle(2, 1)
    target = polyline_spherical_length(2 + unit_circle(20000), closed=True)

    curve = preimage_trace(mobius(0, 1, 1, 0), C)

    assert curve.spherical_length == pytest.approx(target, rel=1e-5)


def test_traced_vertices_map_onto_circle():
    f = rational_function([0.2, 0, 1], [1, 0.3])
    C = CircleOnSphere.circle(0.5, 1.5)

    curve = preimage_trace(f, C)

    z = np.concatenate(curve.plane_points())
    z = z[np.isfinite(z) & (np.abs(z) < 1e3)]
    assert np.max(np.abs(np.abs(f(z) - 0.5) - 1.5)) < 1e-6


def test_chart_switch_radius_does_not_change_length():
    f = rational_function([0, 1])
    C = CircleOnSphere.circle(1.5, 1.2)

    narrow = preimage_trace(f, C, SphereOptions(step_max=1e-3, chart_radius=2.0))
    wide = preimage_trace(f, C, SphereOptions(step_max=1e-3, chart_radius=2.5))

    assert narrow.chart_switches() > 0
    assert abs(narrow.spherical_length - wide.spherical_length) < 1e-6 * narrow.spherical_length


def test_great_circle_meets_equator_twice():
    curve = SphericalCurve.from_plane_polylines([unit_circle(1024)])

    assert great_circle_intersections(curve, [1, 0, 0]) == 2
    assert great_circle_intersections(curve, [0.3, -0.2, 0.5]) == 2


def test_sample_sphere_is_unit_and_seeded():
    a = sample_sphere(500, 4)

    assert np.allclose(np.linalg.norm(a, axis=1), 1.0)
    assert np.array_equal(a, sample_sphere(500, 4))


def test_poincare_estimate_matches_length():
    curve = preimage_trace(rational_function([0, 1]), CircleOnSphere.circle(1.5, 1.2))

    estimate, stderr = poincare_length(curve, n_samples=4000, seed=1)

    assert abs(estimate - curve.spherical_length) <= max(0.02 * curve.spherical_length, 3 * stderr)


def test_poincare_needs_samples():
    curve = SphericalCurve.from_plane_polylines([unit_circle(64)])

    with pytest.raises(ValidationError):
        poincare_length(curve, n_samples=10)


def test_theorem2_for_square_map():
    f = rational_function([0, 0, 1])

    check = check_theorem2(f, CircleOnSphere.circle(0.3, 0.8))

    assert check.holds
    assert check.bound == pytest.approx(2 * TWO_PI)
    assert check.to_dict()["degree"] == 2


def test_homogeneous_to_sphere():
    pts = homogeneous_to_sphere([0, 1, 1], [1, 1, 0])

    assert np.allclose(pts, [[0, 0, -1], [1, 0, 0], [0, 0, 1]])


def test_fourfold_critical_point_is_one_junction():
    f = rational_function(np.polynomial.polynomial.polyfromroots(np.exp(1j * np.pi * (2 * np.arange(5) + 1) / 5)))
    C = CircleOnSphere.circle(0, 1.0)

    junctions = critical_junctions(f, C, SphereOptions().critical_tol)

    assert len(junctions) == 1
    assert junctions[0].multiplicity == 4
    assert preimage_trace(f, C).component_count == 1
