"""Tracing E(p) = {|p| = 1} by continuing the d preimages of e^{iθ} around T.

The θ-circle is cut at every critical phase (a critical value on T). Each
cut carries a junction: the d preimages of that phase, where the branches
meeting at an on-circle critical point are snapped onto it. Open arcs are
traced between consecutive junctions. Vertices and edges then form a graph
whose connected components are the components of E(p); each one is written
out as a closed polyline through an Euler circuit (figure-eight curves
included). With no critical phase the single arc runs from the base point
w = 1 back to itself and its end matching is the monodromy permutation.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist, squareform

from .config_utils import config_dataclass
from .error_handling import ContinuationError, RootSolverError, require
from .poly import (
    DEFAULT_POLY_OPTIONS,
    MonicPolynomial,
    PolyOptions,
    coincident_groups,
    critical_points,
    evaluate,
    multiple_root_spread,
    solve_preimages,
)

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
# on-circle critical points closer than this (relative) are one touch point,
# widened for the scatter of a multiple critical point
CRITICAL_CLUSTER_TOL = 1e-4
# critical values closer than this (relative) coincide
CRITICAL_VALUE_TOL = 1e-8
# critical phases closer than this are one cut
PHASE_MERGE_TOL = 1e-9


def wrap_phase(phase: float) -> float:
    """Reduce to [0, 2π); values within PHASE_MERGE_TOL below 2π become 0."""
    phase = float(np.mod(phase, TWO_PI))
    return 0.0 if phase >= TWO_PI - PHASE_MERGE_TOL else phase


@config_dataclass("trace")
class TraceOptions:
    phase_step_max: float = np.pi / 64  # radians
    spatial_step_max: float | None = None  # default: 0.05 * diameter estimate
    residual_tol: float = 1e-9  # | |p(z)| - 1 | accepted at traced vertices
    critical_phase_tol: float = 1e-6  # | |a| - 1 | below which a critical value is on T
    touch_merge_tol: float = 1e-6  # tracked branches closer than this have merged
    sagitta_tol: float = 1e-5  # max chord-to-curve deviation per segment
    min_phase_step: float = 1e-13  # give up refining below this step
    max_steps: int = 200_000  # per arc

    def validate(self) -> None:
        for name in ("phase_step_max", "residual_tol", "critical_phase_tol",
                     "touch_merge_tol", "sagitta_tol", "min_phase_step"):
            require(getattr(self, name) > 0, f"trace option {name} must be positive")
        require(
            self.spatial_step_max is None or self.spatial_step_max > 0,
            "trace option spatial_step_max must be positive",
        )


Permutation = tuple[int, ...]


@dataclass(frozen=True, eq=False)
class TouchCluster:
    center: complex
    multiplicity: int  # number of critical points merged here
    phase: float


@dataclass(frozen=True, eq=False)
class LevelCurve:
    """A traced level set |p| = radius."""

    components: list[np.ndarray]  # closed polylines, last vertex joins the first
    phases: list[np.ndarray]  # per-vertex θ in [0, 2π)
    branches: list[np.ndarray]  # per-vertex branch index
    monodromy: Permutation
    monodromy_perturbed: bool
    critical_phases: list[float]
    touch_points: list[complex]
    degree: int
    radius: float = 1.0
    options: TraceOptions = field(default_factory=TraceOptions, repr=False)

    @property
    def component_count(self) -> int:
        return len(self.components)

    @property
    def vertex_count(self) -> int:
        return sum(len(c) for c in self.components)

    def vertices(self) -> np.ndarray:
        if not self.components:
            return np.empty(0, dtype=complex)
        return np.concatenate(self.components)

    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        """(start, end) arrays of every closed-polyline edge."""
        starts = [c for c in self.components]
        ends = [np.roll(c, -1) for c in self.components]
        if not starts:
            return np.empty(0, dtype=complex), np.empty(0, dtype=complex)
        return np.concatenate(starts), np.concatenate(ends)

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "radius": self.radius,
            "component_count": self.component_count,
            "monodromy": list(self.monodromy),
            "monodromy_perturbed": self.monodromy_perturbed,
            "critical_phases": list(self.critical_phases),
            "touch_points": [[z.real, z.imag] for z in self.touch_points],
            "components": [
                [[float(z.real), float(z.imag)] for z in comp] for comp in self.components
            ],
        }


def permutation_cycles(sigma: Permutation) -> list[tuple[int, ...]]:
    seen: set[int] = set()
    cycles = []
    for start in range(len(sigma)):
        if start in seen:
            continue
        cycle = []
        k = start
        while k not in seen:
            seen.add(k)
            cycle.append(k)
            k = sigma[k]
        cycles.append(tuple(cycle))
    return cycles


def invert_permutation(sigma: Permutation) -> Permutation:
    inv = [0] * len(sigma)
    for k, s in enumerate(sigma):
        inv[s] = k
    return tuple(inv)


def _poly_options(opts: TraceOptions, poly_options: PolyOptions) -> PolyOptions:
    return replace(poly_options, residual_tol=min(poly_options.residual_tol, opts.residual_tol))


def _canonical_order(z: np.ndarray) -> np.ndarray:
    """Sort preimages by argument, then modulus, for a reproducible branch labelling."""
    args = np.round(np.mod(np.angle(z), TWO_PI), 10)
    args[args >= np.round(TWO_PI, 10)] = 0.0
    return z[np.lexsort((np.abs(z), args))]


def diameter_estimate(p: MonicPolynomial, radius: float = 1.0, poly_options=DEFAULT_POLY_OPTIONS) -> float:
    """Diameter of the preimages of 16 points of the circle (floored at 1e-3)."""
    pts = np.concatenate([
        solve_preimages(p, radius * np.exp(1j * t), options=poly_options)
        for t in np.linspace(0, TWO_PI, 16, endpoint=False)
    ])
    if pts.size < 2:
        return 2.0 * radius
    return max(float(np.max(pdist(np.column_stack([pts.real, pts.imag])))), 1e-3)


def touch_clusters(
    p: MonicPolynomial,
    radius: float = 1.0,
    tol: float = TraceOptions.critical_phase_tol,
    poly_options: PolyOptions = DEFAULT_POLY_OPTIONS,
) -> list[TouchCluster]:
    """Critical points whose critical value lies on the circle, merged into touch points."""
    crit = critical_points(p, poly_options)
    if crit.size == 0:
        return []
    values = evaluate(p, crit)
    on = np.abs(np.abs(values) - radius) <= tol
    if not np.any(on):
        return []
    on_crit = crit[on]
    scale = 1.0 + float(np.max(np.abs(on_crit)))
    spread = multiple_root_spread(scale, p.degree - 1, CRITICAL_CLUSTER_TOL)
    groups = coincident_groups(on_crit, values[on], spread, CRITICAL_VALUE_TOL * (1.0 + radius))
    clusters = []
    for group in groups:
        center = complex(np.mean(on_crit[group]))
        phase = wrap_phase(float(np.angle(evaluate(p, center))))
        clusters.append(TouchCluster(center, len(group), phase))
    return clusters


def _merge_phases(phases: list[float]) -> list[float]:
    merged: list[float] = []
    for ph in sorted(phases):
        if merged and ph - merged[-1] <= PHASE_MERGE_TOL:
            continue
        merged.append(ph)
    if len(merged) > 1 and merged[0] + TWO_PI - merged[-1] <= PHASE_MERGE_TOL:
        merged.pop()
    return merged


def _phase_distance(a: float, b: float) -> float:
    diff = abs(np.mod(a - b + np.pi, TWO_PI) - np.pi)
    return float(diff)


@dataclass
class _Junction:
    """Preimages at a critical phase; touch branches share one vertex."""

    phase: float
    points: np.ndarray  # d entries, snapped
    slot_vertex: list[int]  # vertex id for each entry
    touch_slots: np.ndarray  # bool mask: entry sits on a touch point


def _build_junction(p, phase, radius, clusters, graph, poly_options) -> _Junction:
    pts = solve_preimages(p, radius * np.exp(1j * phase), options=poly_options)
    touch = np.zeros(pts.size, dtype=bool)
    slot_vertex = [-1] * pts.size
    for cl in clusters:
        if _phase_distance(cl.phase, phase) > PHASE_MERGE_TOL * 10:
            continue
        order = np.argsort(np.abs(pts - cl.center))
        order = [k for k in order if not touch[k]][: cl.multiplicity + 1]
        vid = graph.add_vertex(cl.center, phase, int(order[0]) if order else 0)
        graph.touch_vertices.append(vid)
        for k in order:
            pts[k] = cl.center
            touch[k] = True
            slot_vertex[k] = vid
    for k in range(pts.size):
        if slot_vertex[k] < 0:
            slot_vertex[k] = graph.add_vertex(pts[k], phase, k)
    return _Junction(phase, pts, slot_vertex, touch)


class _Graph:
    def __init__(self) -> None:
        self.points: list[complex] = []
        self.phases: list[float] = []
        self.branches: list[int] = []
        self.edges: list[tuple[int, int]] = []
        self.touch_vertices: list[int] = []

    def add_vertex(self, z, phase: float, branch: int) -> int:
        self.points.append(z)
        self.phases.append(wrap_phase(phase))
        self.branches.append(int(branch))
        return len(self.points) - 1

    def add_edge(self, a: int, b: int) -> None:
        self.edges.append((a, b))


def _derivative_step(p: MonicPolynomial, z: np.ndarray, w: complex) -> np.ndarray:
    """dz/dθ = i·w / p′(z); zero where p′ vanishes (junction starts)."""
    dp = p.derivative(z)
    small = np.abs(dp) <= 1e-8 * (1.0 + np.abs(w))
    safe = np.where(small, 1.0, dp)
    return np.where(small, 0.0, 1j * w / safe)


def _separations(z: np.ndarray) -> np.ndarray:
    if z.size < 2:
        return np.full(z.size, np.inf)
    gaps = squareform(pdist(np.column_stack([z.real, z.imag])))
    np.fill_diagonal(gaps, np.inf)
    return gaps.min(axis=1)


def _step_ok(z_old, z_new, z_pred, spatial, sagitta_tol, check_prediction, exempt=None) -> bool:
    if np.max(np.abs(z_new - z_old)) > spatial:
        return False
    if not check_prediction:
        return True
    err = z_new - z_pred
    mask = np.ones(z_new.size, dtype=bool) if exempt is None else ~exempt
    if np.any(np.abs(err[mask]) >= 0.5 * _separations(z_new)[mask]):
        return False
    chord = z_new - z_old
    length = np.abs(chord)
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(length > 0, chord / np.where(length > 0, length, 1.0), 0.0)
    sagitta = np.abs(np.imag(err * np.conj(unit))) / 4.0
    return bool(np.all(sagitta[mask] <= sagitta_tol))


def _trace_arc(p, theta_start, theta_end, start_points, end_points, end_touch, radius,
               opts: TraceOptions, spatial, poly_options):
    """Continue the d branches from start_points (at theta_start) to end_points.

    Returns (paths, path_phases, end_index): paths[k] are the interior points
    of branch k, end_index[k] the end slot branch k arrives at.
    """
    direction = 1.0 if theta_end >= theta_start else -1.0
    total = abs(theta_end - theta_start)
    d = start_points.size
    z = np.array(start_points, dtype=complex)
    fresh = bool(np.any(_separations(z) <= opts.touch_merge_tol))
    progress = 0.0
    h = min(opts.phase_step_max, total)
    paths: list[list[complex]] = [[] for _ in range(d)]
    path_phases: list[float] = []

    for _ in range(opts.max_steps):
        theta = theta_start + direction * progress
        w = radius * np.exp(1j * theta)
        remaining = total - progress
        h = min(h, opts.phase_step_max)
        slope = direction * _derivative_step(p, z, w) if not fresh else np.zeros(d, dtype=complex)

        if h >= remaining - 1e-15:
            z_pred = z + remaining * slope
            cost = np.abs(z_pred[:, None] - end_points[None, :])
            _, end_index = linear_sum_assignment(cost)
            z_new = end_points[end_index]
            if _step_ok(z, z_new, z_pred, spatial, opts.sagitta_tol, not fresh,
                        exempt=end_touch[end_index]):
                return paths, path_phases, end_index
            h = remaining / 2.0
        else:
            theta_new = theta + direction * h
            z_pred = z + h * slope
            try:
                z_new = solve_preimages(p, radius * np.exp(1j * theta_new), hint=z_pred, options=poly_options)
            except RootSolverError:
                z_new = None
            if z_new is not None and _step_ok(z, z_new, z_pred, spatial, opts.sagitta_tol, not fresh):
                z = z_new
                progress += h
                for k in range(d):
                    paths[k].append(z[k])
                path_phases.append(theta_new)
                fresh = False
                h *= 1.5
                continue
            h /= 2.0

        if h < opts.min_phase_step:
            raise ContinuationError(
                "branch collision unresolved within tolerance",
                location={"theta": float(np.mod(theta, TWO_PI)), "radius": radius},
            )
    raise ContinuationError(
        f"step budget of {opts.max_steps} exhausted",
        location={"theta": float(np.mod(theta_start + direction * progress, TWO_PI))},
    )


def _euler_circuit(adjacency, used, start: int) -> list[int]:
    stack = [start]
    circuit: list[int] = []
    cursor: dict[int, int] = defaultdict(int)
    while stack:
        v = stack[-1]
        nbrs = adjacency[v]
        while cursor[v] < len(nbrs) and used[nbrs[cursor[v]][1]]:
            cursor[v] += 1
        if cursor[v] == len(nbrs):
            circuit.append(stack.pop())
        else:
            u, e = nbrs[cursor[v]]
            used[e] = True
            stack.append(u)
    return circuit[::-1]


def _components(graph: _Graph):
    n = len(graph.points)
    edges = np.array(graph.edges, dtype=int).reshape(-1, 2)
    adj = coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n))
    n_comp, labels = connected_components(adj, directed=False)
    adjacency: dict[int, list[tuple[int, int]]] = defaultdict(list)
    for e, (a, b) in enumerate(edges):
        adjacency[a].append((b, e))
        adjacency[b].append((a, e))
    used = np.zeros(len(edges), dtype=bool)
    points = np.array(graph.points)
    phases = np.array(graph.phases)
    branches = np.array(graph.branches)
    comps, comp_phases, comp_branches = [], [], []
    for c in range(n_comp):
        members = np.flatnonzero(labels == c)
        if not any(adjacency[v] for v in members):
            continue
        circuit = _euler_circuit(adjacency, used, int(members[0]))[:-1]
        comps.append(points[circuit])
        comp_phases.append(phases[circuit])
        comp_branches.append(branches[circuit])
    return comps, comp_phases, comp_branches


def _spatial_cap(p, opts, radius, poly_options) -> float:
    if opts.spatial_step_max is not None:
        return opts.spatial_step_max
    return 0.05 * diameter_estimate(p, radius, poly_options)


def _loop_monodromy(p, radius, opts, spatial, poly_options, reverse=False):
    """σ and the traced paths of one loop around the circle from w = radius."""
    start = _canonical_order(solve_preimages(p, radius, options=poly_options))
    end_theta = -TWO_PI if reverse else TWO_PI
    no_touch = np.zeros(start.size, dtype=bool)
    paths, path_phases, end_index = _trace_arc(
        p, 0.0, end_theta, start, start, no_touch, radius, opts, spatial, poly_options
    )
    return tuple(int(k) for k in end_index), start, paths, path_phases


def trace(
    p: MonicPolynomial,
    opts: TraceOptions | None = None,
    *,
    radius: float = 1.0,
    reverse: bool = False,
    poly_options: PolyOptions = DEFAULT_POLY_OPTIONS,
) -> LevelCurve:
    """Trace E(p) (or |p| = radius, used internally for the perturbed circle)."""

    opts = opts or TraceOptions()
    opts.validate()
    require(p.degree >= 1, "trace needs a polynomial of degree at least 1")
    popts = _poly_options(opts, poly_options)
    spatial = _spatial_cap(p, opts, radius, popts)
    clusters = touch_clusters(p, radius, opts.critical_phase_tol, popts)
    cuts = _merge_phases([cl.phase for cl in clusters])
    graph = _Graph()

    if not cuts:
        sigma, start, paths, path_phases = _loop_monodromy(p, radius, opts, spatial, popts, reverse)
        start_ids = [graph.add_vertex(z, 0.0, k) for k, z in enumerate(start)]
        _link_paths(graph, start_ids, [start_ids[s] for s in sigma], paths, path_phases)
        perturbed = False
    else:
        junctions = [_build_junction(p, ph, radius, clusters, graph, popts) for ph in cuts]
        for j, junction in enumerate(junctions):
            nxt = junctions[(j + 1) % len(junctions)]
            end_phase = nxt.phase + (TWO_PI if j + 1 == len(junctions) else 0.0)
            a, b = (junction, nxt) if not reverse else (nxt, junction)
            theta_a, theta_b = (junction.phase, end_phase) if not reverse else (end_phase, junction.phase)
            paths, path_phases, end_index = _trace_arc(
                p, theta_a, theta_b, a.points, b.points, b.touch_slots,
                radius, opts, spatial, popts,
            )
            end_ids = [b.slot_vertex[s] for s in end_index]
            _link_paths(graph, a.slot_vertex, end_ids, paths, path_phases)
        sigma = monodromy(p, opts, reverse=reverse, poly_options=poly_options)
        perturbed = True

    comps, comp_phases, comp_branches = _components(graph)
    logger.debug("traced degree-%d level set: %d components, %d vertices",
                 p.degree, len(comps), len(graph.points))
    return LevelCurve(
        components=comps,
        phases=comp_phases,
        branches=comp_branches,
        monodromy=sigma,
        monodromy_perturbed=perturbed,
        critical_phases=list(cuts),
        touch_points=[graph.points[v] for v in graph.touch_vertices],
        degree=p.degree,
        radius=radius,
        options=opts,
    )


def _link_paths(graph: _Graph, start_ids, end_ids, paths, path_phases) -> None:
    for k, path in enumerate(paths):
        prev = start_ids[k]
        for z, ph in zip(path, path_phases):
            vid = graph.add_vertex(z, ph, k)
            graph.add_edge(prev, vid)
            prev = vid
        graph.add_edge(prev, end_ids[k])


def monodromy(
    p: MonicPolynomial,
    opts: TraceOptions | None = None,
    *,
    reverse: bool = False,
    poly_options: PolyOptions = DEFAULT_POLY_OPTIONS,
) -> Permutation:
    """Boundary-circle monodromy: preimage k of w = 1 continues to preimage σ(k).

    With a critical value on T the loop is taken on the circle of radius
    1 + 2·critical_phase_tol instead, and a warning is logged.
    """
    opts = opts or TraceOptions()
    opts.validate()
    popts = _poly_options(opts, poly_options)
    radius = 1.0
    if touch_clusters(p, 1.0, opts.critical_phase_tol, popts):
        radius = 1.0 + 2.0 * opts.critical_phase_tol
        logger.warning("critical value on the unit circle; monodromy taken on radius %.9f", radius)
    spatial = _spatial_cap(p, opts, radius, popts)
    sigma, *_ = _loop_monodromy(p, radius, opts, spatial, popts, reverse)
    return sigma


def component_count(p: MonicPolynomial, opts: TraceOptions | None = None) -> int:
    return trace(p, opts).component_count


def is_connected(p: MonicPolynomial, opts: TraceOptions | None = None) -> bool:
    return component_count(p, opts) == 1


def grid_component_count(p: MonicPolynomial, resolution: int = 1500, margin: float = 2.0) -> int:
    """Marching-squares count of the components of {|p| = 1} on a grid.

    Contour pieces passing within three grid cells of each other are merged,
    so curves touching at a critical point count once.
    """
    import contourpy

    roots = p.roots
    x = np.linspace(roots.real.min() - margin, roots.real.max() + margin, resolution)
    y = np.linspace(roots.imag.min() - margin, roots.imag.max() + margin, resolution)
    xx, yy = np.meshgrid(x, y)
    with np.errstate(divide="ignore"):
        field_ = np.log(np.abs(evaluate(p, xx + 1j * yy)))
    field_ = np.where(np.isfinite(field_), field_, -50.0)
    lines = [ln for ln in contourpy.contour_generator(x, y, field_).lines(0.0) if len(ln)]
    if not lines:
        return 0
    points = np.concatenate(lines)
    owner = np.concatenate([np.full(len(ln), i) for i, ln in enumerate(lines)])
    cell = max(x[1] - x[0], y[1] - y[0])
    pairs = cKDTree(points).query_pairs(3.0 * cell, output_type="ndarray")
    links = owner[pairs] if len(pairs) else np.empty((0, 2), dtype=int)
    n = len(lines)
    adj = coo_matrix((np.ones(len(links)), (links[:, 0], links[:, 1])), shape=(n, n))
    count, _ = connected_components(adj, directed=False)
    return int(count)
