import numpy as np
import pytest

from lemni.error_handling import RootSolverError, ValidationError
from lemni.poly import (
    PolyOptions,
    aberth_roots,
    cluster_indices,
    coincident_groups,
    critical_points,
    critical_values,
    evaluate,
    from_coefficients,
    from_roots,
    match_to_hint,
    multiple_root_spread,
    multiset_distance,
    solve_preimages,
    solve_preimages_many,
)


def random_roots(rng, d, radius=2.0):
    r = radius * np.sqrt(rng.uniform(size=d))
    return r * np.exp(2j * np.pi * rng.uniform(size=d))


def test_from_roots_is_monic_and_keeps_order():
    p = from_roots([1j, -1j])

    assert p.degree == 2
    assert np.allclose(p.coeffs, [1, 0, 1])
    assert p.coeffs[-1] == 1
    assert list(p.roots) == [1j, -1j]


def test_arrays_are_read_only():
    p = from_roots([1, 2])

    with pytest.raises(ValueError):
        p.roots[0] = 5


def test_horner_matches_root_product():
    rng = np.random.default_rng(1)
    for d in range(1, 9):
        p = from_roots(random_roots(rng, d))
        z = random_roots(rng, 50, radius=3.0)
        assert np.allclose(evaluate(p, z), p.evaluate_product(z), rtol=1e-10, atol=1e-10)


def test_empty_roots_rejected():
    with pytest.raises(ValidationError, match="degree-zero"):
        from_roots([])


def test_degree_cap():
    with pytest.raises(ValidationError, match="exceeds the cap"):
        from_roots(np.zeros(65))


def test_non_monic_coefficients_rejected():
    with pytest.raises(ValidationError, match="not monic"):
        from_coefficients([1, 0, 2])


def test_leading_coefficient_tolerance():
    p = from_coefficients([1, 0, 1 + 1e-13])

    assert p.coeffs[-1] == 1
    assert multiset_distance(p.roots, [1j, -1j]) < 1e-10


def test_roots_from_coefficients_recover_random_roots():
    rng = np.random.default_rng(7)
    for d in (2, 3, 5, 8):
        roots = random_roots(rng, d)
        p = from_coefficients(from_roots(roots).coeffs)
        assert multiset_distance(p.roots, roots) < 1e-8


def test_cube_roots_of_unity():
    z = aberth_roots(np.array([-1, 0, 0, 1], dtype=complex))
    expected = np.exp(2j * np.pi * np.arange(3) / 3)

    assert multiset_distance(z, expected) < 1e-12


def test_multiple_roots_cluster():
    # (z - 1)^2 (z + 2)
    p = from_coefficients(from_roots([1, 1, -2]).coeffs)

    groups = cluster_indices(p.roots, 1e-6)

    assert sorted(len(g) for g in groups) == [1, 2]


def test_root_solver_failure_reports_best_residual():
    rng = np.random.default_rng(3)
    coeffs = from_roots(random_roots(rng, 8)).coeffs
    opts = PolyOptions(max_iter=1, restarts=0, residual_tol=1e-15)

    with pytest.raises(RootSolverError) as info:
        aberth_roots(coeffs, options=opts)

    assert info.value.stage == "root_solver"
    assert info.value.location["best_residual"] > 1e-15


def test_preimages_follow_hint():
    p = from_roots([0, 0])

    assert np.allclose(solve_preimages(p, 1.0, hint=[0.9, -0.9]), [1, -1])
    assert np.allclose(solve_preimages(p, 1.0, hint=[-0.9, 0.9]), [-1, 1])


def test_bad_hint_is_ignored():
    p = from_roots([0, 0, 0])

    z = solve_preimages(p, 1.0, hint=[1.0, np.nan, 2.0])

    assert multiset_distance(z, np.exp(2j * np.pi * np.arange(3) / 3)) < 1e-10


def test_match_to_hint_is_a_permutation():
    values = np.array([3, 1, 2], dtype=complex)

    assert list(match_to_hint(values, np.array([1.1, 2.1, 2.9]))) == [1, 2, 3]


def test_critical_points_of_z3_plus_1():
    p = from_coefficients([1, 0, 0, 1])

    crit = critical_points(p)

    assert crit.size == 2
    assert np.max(np.abs(crit)) < 1e-6
    assert np.allclose(critical_values(p), [1, 1], atol=1e-10)


def test_degree_one_has_no_critical_points():
    assert critical_points(from_roots([3 + 1j])).size == 0


def test_shift_and_rotation():
    p = from_roots([1j, -1j])

    assert multiset_distance(p.shifted(2).roots, [2 + 1j, 2 - 1j]) < 1e-15
    assert multiset_distance(p.rotated(np.pi / 2).roots, [-1, 1]) < 1e-12


def test_to_dict_shape():
    out = from_roots([1, -1]).to_dict()

    assert out["degree"] == 2
    assert out["roots"] == [[1.0, 0.0], [-1.0, 0.0]]
    assert out["coeffs"][-1] == [1.0, 0.0]


def test_derivative_matches_central_difference():
    rng = np.random.default_rng(3)
    p = from_roots(random_roots(rng, 5))
    z = random_roots(rng, 20, radius=1.5)
    h = 1e-5

    numeric = (evaluate(p, z + h) - evaluate(p, z - h)) / (2 * h)

    assert np.allclose(p.derivative(z), numeric, rtol=1e-6, atol=1e-8)


def test_preimages_of_conjugate_value_are_conjugates():
    p = from_coefficients([0.3, -1.2, 0.5, 0.7, 1])
    w = np.exp(0.8j)

    z = solve_preimages(p, w)

    assert multiset_distance(solve_preimages(p, np.conj(w)), np.conj(z)) < 1e-9


def test_batched_preimages_match_one_at_a_time():
    rng = np.random.default_rng(8)
    p = from_roots(random_roots(rng, 4))
    w = np.exp(1j * np.linspace(0, 2 * np.pi, 9))

    batch = solve_preimages_many(p, w)

    assert batch.shape == (9, 4)
    for row, wk in zip(batch, w):
        assert multiset_distance(row, solve_preimages(p, wk)) < 1e-9


def test_batched_preimages_of_degree_one():
    z = solve_preimages_many(from_roots([2j]), [1.0, -1.0])

    assert np.allclose(z[:, 0], [1 + 2j, -1 + 2j])


def test_multiple_root_spread_widens_with_multiplicity():
    assert multiple_root_spread(1.0, 1) == 1e-4
    assert multiple_root_spread(2.0, 1) == 2e-4
    assert multiple_root_spread(1.0, 4) > 1e-3
    assert multiple_root_spread(1.0, 8) > multiple_root_spread(1.0, 4)


def test_coincident_groups_split_on_values():
    points = [0.0, 1e-4, 2e-4, 5.0]
    values = [1.0, 1.0, -1.0, 1.0]

    groups = coincident_groups(points, values, spread=1e-3, value_tol=1e-8)

    assert sorted(sorted(g) for g in groups) == [[0, 1], [2], [3]]


def test_fourfold_critical_point_of_rounded_polynomial_forms_one_group():
    p = from_roots(np.exp(1j * np.pi * (2 * np.arange(5) + 1) / 5))
    crit = critical_points(p)

    groups = coincident_groups(crit, evaluate(p, crit), multiple_root_spread(2.0, 4), 1e-8)

    assert len(groups) == 1
