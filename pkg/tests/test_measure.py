import math

import numpy as np
import pytest

from lemni.error_handling import ValidationError
from lemni.levelset import trace
from lemni.measure import (
    BERNOULLI_LENGTH,
    Line,
    alpha0_bound,
    arc_length,
    arc_length_bound,
    bernoulli_reference,
    borwein_bound,
    cartan_cover,
    cluster_split,
    length_integral,
    length_integral_with_error,
    length_polyline,
    line_intersection_count,
    polyline_crofton_length,
    polyline_projection_lengths,
    projection_lengths,
    projection_bound_sublevel,
    verify_projection_corollary,
    verify_theorem1,
)
from lemni.poly import evaluate, from_coefficients, from_roots


def unit_circle(n):
    return np.exp(2j * np.pi * np.arange(n) / n)


def test_constants():
    assert alpha0_bound() < 9.173
    assert alpha0_bound() > 9.17
    assert borwein_bound(1) == pytest.approx(68.32, abs=1e-2)
    assert bernoulli_reference() == pytest.approx(BERNOULLI_LENGTH, abs=1e-3)


@pytest.mark.parametrize("d", [1, 2, 3, 6])
def test_circle_length(d):
    assert abs(length_integral(from_roots(np.zeros(d))) - 2 * math.pi) < 1e-6


def test_bernoulli_lemniscate_length():
    p = from_roots([1j, -1j])

    exact = length_integral(p)

    assert abs(exact - BERNOULLI_LENGTH) < 5e-3
    assert abs(exact - bernoulli_reference()) < 1e-5


def test_polyline_agrees_with_integral():
    p = from_roots([1j, -1j])

    assert abs(length_polyline(trace(p)) - BERNOULLI_LENGTH) < 2e-2


def test_crofton_on_circle_polyline():
    estimate, stderr = polyline_crofton_length(unit_circle(1024))

    assert abs(estimate - 2 * math.pi) < 0.05
    assert stderr >= 0


def test_line_validation():
    with pytest.raises(ValidationError):
        Line(math.pi, 0.0)

    line = Line.normalized(1.5 * math.pi, 1.0)
    assert line.theta == pytest.approx(0.5 * math.pi)
    assert line.x == -1.0


def test_imaginary_axis_meets_figure_eight_three_times():
    p = from_roots([1j, -1j])

    assert line_intersection_count(p, Line(0.0, 0.0), trace(p)) == 3


def test_random_lines_meet_at_most_2d_times():
    rng = np.random.default_rng(11)
    p = from_roots([0.4, -0.7 + 0.5j, 0.2 - 0.9j, 1.1j])
    curve = trace(p)

    for _ in range(100):
        line = Line(rng.uniform(0, math.pi), rng.uniform(-2.5, 2.5))
        assert line_intersection_count(p, line, curve) <= 2 * p.degree


def test_projection_of_square():
    px, py = polyline_projection_lengths([0, 1, 1 + 1j, 1j])

    assert px == pytest.approx(1.0)
    assert py == pytest.approx(1.0)


def test_projection_of_disjoint_segments():
    px, py = polyline_projection_lengths([0, 1, 3, 4], closed=False)

    assert px == pytest.approx(4.0)
    assert py == 0.0


def test_projection_corollary_on_two_ovals():
    p = from_roots([2, -2])

    assert verify_projection_corollary(trace(p), p.degree)


def test_cartan_cover_contains_sublevel_set():
    p = from_roots([0.3, -0.8 + 0.4j, 0.5 - 1.2j, 1.5j])
    M = 1.0

    cover = cartan_cover(p, M)

    assert cover.certified
    assert cover.total_radius <= 2 * math.e * M ** (1 / p.degree) + 1e-9
    x = np.linspace(-3, 3, 301)
    grid = (x[None, :] + 1j * x[:, None]).ravel()
    inside = grid[np.abs(evaluate(p, grid)) < M]
    assert inside.size > 0
    assert np.all(cover.covers(inside))
    assert projection_bound_sublevel(cover) == pytest.approx(4 * cover.total_radius)


def test_cartan_cover_of_clustered_roots_uses_one_disc():
    cover = cartan_cover(from_roots([0, 0, 0]), 1.0)

    assert len(cover.discs) == 1
    assert cover.certified


def test_cluster_split():
    far = cluster_split([0, 0.5, 10], 1.0)
    assert far is not None
    near, rest = far
    assert sorted(near.real) == [0.0, 0.5]
    assert list(rest) == [10]

    assert cluster_split([0, 1, 2], 1.0) is None


def test_arc_length_below_bound():
    p = from_coefficients([1, 0, 0, 1])

    assert arc_length(p, 0.1, 0.6) <= arc_length_bound(3, 0.5)


def test_arc_length_bound_range():
    with pytest.raises(ValidationError):
        arc_length_bound(2, 1.0)


def test_theorem1_report_for_bernoulli():
    report = verify_theorem1(from_roots([1j, -1j]))

    assert report.satisfies_theorem1
    assert report.satisfies_borwein
    assert report.connected and report.component_count == 1
    assert abs(report.polyline - report.exact_integral) < 2e-2
    assert abs(report.crofton - report.exact_integral) < 0.1
    assert report.hull_perimeter < alpha0_bound()
    assert report.to_dict()["bound_alpha0_d"] == pytest.approx(2 * alpha0_bound())


def test_length_is_translation_and_rotation_invariant():
    p = from_roots([0.7, -0.3 + 0.8j, -0.4 - 0.6j])
    base = length_integral(p)

    assert length_integral(p.shifted(1.5 - 2j)) == pytest.approx(base, rel=1e-6)
    assert length_integral(p.rotated(0.9)) == pytest.approx(base, rel=1e-6)


def test_crofton_on_regular_polygon():
    n = 64
    polygon = unit_circle(n)
    perimeter = n * abs(polygon[1] - polygon[0])

    estimate, _ = polyline_crofton_length(polygon)

    assert estimate == pytest.approx(perimeter, rel=1e-2)


def test_projection_lengths_of_traced_unit_circle():
    px, py = projection_lengths(trace(from_roots([0])))

    assert px == pytest.approx(2.0, abs=1e-3)
    assert py == pytest.approx(2.0, abs=1e-3)


def test_projection_lengths_of_figure_eight_match_traced_extent():
    curve = trace(from_roots([1j, -1j]))
    z = curve.vertices()

    px, py = projection_lengths(curve)

    assert px == pytest.approx(z.real.max() - z.real.min(), abs=1e-9)
    assert py == pytest.approx(z.imag.max() - z.imag.min(), abs=1e-9)
    # |1 − y²| = 1 at y = ±√2 on the imaginary axis; each lobe is 1 wide
    assert py == pytest.approx(2 * math.sqrt(2), abs=1e-3)
    assert px == pytest.approx(1.0, abs=1e-3)


def test_two_ovals_have_equal_lengths():
    p = from_roots([2, -2])
    curve = trace(p)

    assert length_integral(p) == pytest.approx(length_polyline(curve), rel=1e-3)
    a, b = (np.sum(np.abs(np.roll(c, -1) - c)) for c in curve.components)
    assert a == pytest.approx(b, rel=1e-6)


@pytest.mark.parametrize("d", [4, 5])
def test_length_across_multiple_critical_point(d):
    p = from_roots(np.exp(1j * np.pi * (2 * np.arange(d) + 1) / d))

    exact, err = length_integral_with_error(p)

    assert err < 1e-2 * exact
    assert abs(exact - length_polyline(trace(p))) < 5e-3 * exact
