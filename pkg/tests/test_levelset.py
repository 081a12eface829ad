import logging

import numpy as np
import pytest

from lemni.error_handling import ValidationError
from lemni.levelset import (
    TraceOptions,
    component_count,
    grid_component_count,
    invert_permutation,
    is_connected,
    monodromy,
    permutation_cycles,
    touch_clusters,
    trace,
    wrap_phase,
)
from lemni.poly import from_coefficients, from_roots


def z_power(d):
    return from_roots(np.zeros(d))


def z_power_plus_one(d):
    return from_roots(np.exp(1j * np.pi * (2 * np.arange(d) + 1) / d))


def test_permutation_helpers():
    sigma = (1, 2, 0, 4, 3)

    assert permutation_cycles(sigma) == [(0, 1, 2), (3, 4)]
    assert invert_permutation(sigma) == (2, 0, 1, 4, 3)


@pytest.mark.parametrize("d", [1, 2, 3, 5])
def test_monodromy_of_z_power_is_a_full_cycle(d):
    sigma = monodromy(z_power(d))

    cycles = permutation_cycles(sigma)
    assert len(cycles) == 1 and len(cycles[0]) == d


def test_reverse_loop_inverts_monodromy():
    p = from_roots([0.3, -0.5 + 0.2j, 0.1 - 0.4j])

    forward = monodromy(p)
    backward = monodromy(p, reverse=True)

    assert invert_permutation(forward) == backward


def test_disconnected_level_set():
    curve = trace(from_roots([2, -2]))

    assert curve.component_count == 2
    assert not curve.monodromy_perturbed
    assert permutation_cycles(curve.monodromy) == [(0,), (1,)]


def test_traced_vertices_lie_on_the_level_set():
    p = from_roots([0.5, -0.4 + 0.3j, 1j])

    curve = trace(p)

    assert np.max(np.abs(np.abs(p(curve.vertices())) - 1.0)) < 1e-8


def test_figure_eight_is_one_component():
    p = from_roots([1j, -1j])

    curve = trace(p)

    assert curve.component_count == 1
    assert len(curve.critical_phases) == 1
    assert abs(np.angle(np.exp(1j * curve.critical_phases[0]))) < 1e-9
    assert len(curve.touch_points) == 1
    assert abs(curve.touch_points[0]) < 1e-8
    assert curve.monodromy_perturbed


def test_monodromy_with_critical_value_on_circle_warns(caplog):
    with caplog.at_level(logging.WARNING, logger="lemni.levelset"):
        sigma = monodromy(from_roots([1j, -1j]))

    assert "critical value on the unit circle" in caplog.text
    assert sorted(sigma) == [0, 1]


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_z_power_plus_one_is_connected(d):
    assert is_connected(z_power_plus_one(d))


def test_touch_clusters_merge_multiple_critical_point():
    clusters = touch_clusters(from_coefficients([1, 0, 0, 0, 1]))

    assert len(clusters) == 1
    assert clusters[0].multiplicity == 3


def test_component_count_matches_grid():
    for p in (from_roots([2, -2]), z_power_plus_one(3), from_roots([0.6, -0.6, 1.8j])):
        assert component_count(p) == grid_component_count(p, resolution=500)


def test_segments_close_each_component():
    curve = trace(z_power(1))
    starts, ends = curve.segments()

    assert starts.size == curve.vertex_count
    assert ends[-1] == starts[0]


def test_to_dict_round_trips_counts():
    curve = trace(from_roots([2, -2]))

    out = curve.to_dict()

    assert out["component_count"] == 2
    assert len(out["components"]) == 2


def test_invalid_options_rejected():
    with pytest.raises(ValidationError, match="phase_step_max"):
        trace(z_power(2), TraceOptions(phase_step_max=-1.0))


def test_rounded_z5_plus_one_has_one_fourfold_touch_point():
    clusters = touch_clusters(z_power_plus_one(5))

    assert len(clusters) == 1
    assert clusters[0].multiplicity == 4
    assert abs(clusters[0].center) < 1e-3
    assert clusters[0].phase < 1e-9


def test_rounded_z5_plus_one_traces_as_one_component():
    curve = trace(z_power_plus_one(5))

    assert curve.component_count == 1
    assert len(curve.touch_points) == 1
    assert all(0.0 <= phase < 2 * np.pi for phase in curve.critical_phases)


def test_wrap_phase():
    assert wrap_phase(2 * np.pi - 1e-15) == 0.0
    assert wrap_phase(-1e-15) == 0.0
    assert wrap_phase(2 * np.pi + 0.5) == pytest.approx(0.5)
    assert wrap_phase(-0.5) == pytest.approx(2 * np.pi - 0.5)


@pytest.mark.parametrize(
    "p",
    [from_roots([1j, -1j]), from_roots([0.4, -0.7 + 0.5j, 1.1j])],
    ids=["figure-eight", "cubic"],
)
def test_branches_stay_apart_away_from_critical_phases(p):
    curve = trace(p)
    points = curve.vertices()
    phases = np.concatenate(curve.phases)

    for phase in np.unique(np.round(phases, 12)):
        if curve.critical_phases and min(
            abs(np.angle(np.exp(1j * (phase - c)))) for c in curve.critical_phases
        ) <= 1e-3:
            continue
        same = points[np.abs(phases - phase) < 1e-12]
        if same.size > 1:
            gaps = np.abs(same[:, None] - same[None, :]) + np.eye(same.size)
            assert gaps.min() > curve.options.touch_merge_tol


@pytest.mark.parametrize(
    "p",
    [from_roots([2, -2]), from_roots([1j, -1j]), z_power_plus_one(3), from_roots([0.6, -0.6, 1.8j])],
)
def test_reverse_tracing_keeps_component_count(p):
    assert trace(p, reverse=True).component_count == trace(p).component_count
