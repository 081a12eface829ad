"""Preimages of circles under rational maps, measured on the Riemann sphere.

Points are carried as unit vectors in R^3 (stereographic projection, ∞ at
the north pole) so the tracer never divides by a vanishing denominator.
A circle or line C is parametrised homogeneously, w(t) = a(t)/b(t), and the
d preimages of w(t) are the roots of b·num − a·den; roots that escape to ∞
are recovered in the inverted chart u = 1/z. Polylines are reported in chart
coordinates: the plane chart z, or u for vertices near ∞, switching inside
the annulus 1/R < |z| < R.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist, pdist, squareform

from .config_utils import config_dataclass
from .error_handling import ContinuationError, ValidationError, require
from .levelset import PHASE_MERGE_TOL, TWO_PI, _components, _Graph, _link_paths, _merge_phases
from .measure import Line
from .poly import multiple_root_spread

logger = logging.getLogger(__name__)

NORTH = np.array([0.0, 0.0, 1.0])
# critical points of f closer than this (chordally) are one junction,
# widened for the scatter of a multiple critical point
CRITICAL_CLUSTER_TOL = 1e-4
# critical values closer than this (chordally) coincide
CRITICAL_VALUE_TOL = 1e-8
# sphere points closer than this are the same vertex
COINCIDENT_TOL = 1e-12


@config_dataclass("sphere")
class SphereOptions:
    step_max: float = 2e-3  # chordal step cap on the unit sphere
    junction_step_max: float = 0.05  # cap for strands leaving or entering a junction
    param_step_max: float = TWO_PI / 256
    min_param_step: float = 1e-15
    max_steps: int = 400_000  # per arc
    critical_tol: float = 1e-6  # relative distance below which a critical value lies on C
    coprime_tol: float = 1e-8
    chart_radius: float = 2.0  # charts switch inside 1/R < |z| < R
    n_samples: int = 10_000  # Poincaré sample points

    def validate(self) -> None:
        for name in ("step_max", "junction_step_max", "param_step_max", "min_param_step",
                     "critical_tol", "coprime_tol"):
            require(getattr(self, name) > 0, f"sphere option {name} must be positive")
        require(self.chart_radius > 1.0, "sphere option chart_radius must exceed 1")


# -- sphere coordinates -----------------------------------------------------


def plane_to_sphere(z) -> np.ndarray:
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    out = np.empty((z.size, 3))
    small = np.abs(z) <= 1.0
    zs = z[small]
    den = 1.0 + np.abs(zs) ** 2
    out[small] = np.column_stack([2 * zs.real / den, 2 * zs.imag / den, (np.abs(zs) ** 2 - 1) / den])
    if np.any(~small):
        out[~small] = inverted_to_sphere(1.0 / z[~small])
    return out


def inverted_to_sphere(u) -> np.ndarray:
    u = np.atleast_1d(np.asarray(u, dtype=complex))
    den = 1.0 + np.abs(u) ** 2
    return np.column_stack([2 * u.real / den, -2 * u.imag / den, (1 - np.abs(u) ** 2) / den])


def sphere_to_chart(points: np.ndarray, inverted) -> np.ndarray:
    """Chart coordinate of each point: z = (X + iY)/(1 − Z), or u = 1/z = (X − iY)/(1 + Z)."""
    pts = np.atleast_2d(points)
    inverted = np.broadcast_to(np.asarray(inverted, dtype=bool), (pts.shape[0],))
    X, Y, Z = pts[:, 0], pts[:, 1], pts[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        plane = (X + 1j * Y) / (1.0 - Z)
        inv = (X - 1j * Y) / (1.0 + Z)
    return np.where(inverted, inv, plane)


def chordal_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return cdist(np.atleast_2d(a), np.atleast_2d(b))


# -- rational functions -----------------------------------------------------


def _trim(coeffs: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(coeffs)
    return coeffs[: nz[-1] + 1] if nz.size else coeffs[:1]


@dataclass(frozen=True, eq=False)
class RationalFunction:
    """f = numerator/denominator, ascending coefficients, denominator monic."""

    numerator: np.ndarray
    denominator: np.ndarray

    @property
    def degree(self) -> int:
        return max(self.numerator.size, self.denominator.size) - 1

    def padded(self) -> tuple[np.ndarray, np.ndarray]:
        """Both coefficient arrays padded to length d + 1."""
        n = self.degree + 1
        num = np.zeros(n, dtype=complex)
        den = np.zeros(n, dtype=complex)
        num[: self.numerator.size] = self.numerator
        den[: self.denominator.size] = self.denominator
        return num, den

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            return P.polyval(z, self.numerator) / P.polyval(z, self.denominator)

    def homogeneous(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(A, B) with f = A/B at sphere points, evaluated in the better chart."""
        pts = np.atleast_2d(points)
        num, den = self.padded()
        upper = pts[:, 2] > 0
        zeta = sphere_to_chart(pts, upper)
        with np.errstate(invalid="ignore", over="ignore"):
            A = np.where(upper, P.polyval(zeta, num[::-1]), P.polyval(zeta, num))
            B = np.where(upper, P.polyval(zeta, den[::-1]), P.polyval(zeta, den))
        return A, B

    def wronskian(self) -> np.ndarray:
        """num′·den − num·den′: its roots are the finite critical points."""
        return P.polysub(
            P.polymul(P.polyder(self.numerator), self.denominator),
            P.polymul(self.numerator, P.polyder(self.denominator)),
        )

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "numerator": [[float(c.real), float(c.imag)] for c in self.numerator],
            "denominator": [[float(c.real), float(c.imag)] for c in self.denominator],
        }


def rational_function(
    numerator: Sequence[complex],
    denominator: Sequence[complex] = (1.0,),
    options: SphereOptions | None = None,
) -> RationalFunction:
    """Validate and normalise num/den (ascending coefficients)."""
    options = options or SphereOptions()
    num = _trim(np.atleast_1d(np.asarray(numerator, dtype=complex)))
    den = _trim(np.atleast_1d(np.asarray(denominator, dtype=complex)))
    require(bool(np.all(np.isfinite(num)) and np.all(np.isfinite(den))), "coefficients must be finite")
    if not np.any(den):
        raise ValidationError("denominator is identically zero")
    lead = den[-1]
    num, den = num / lead, den / lead
    den[-1] = 1.0
    f = RationalFunction(num, den)
    require(f.degree >= 1 and np.any(num), "rational function must be non-constant")
    if num.size > 1 and den.size > 1:
        gap = np.min(np.abs(P.polyroots(num)[:, None] - P.polyroots(den)[None, :]))
        require(gap > options.coprime_tol, f"numerator and denominator share a root (gap {gap:.3g})")
    return f


def mobius(a: complex, b: complex, c: complex, d: complex) -> RationalFunction:
    """(a·z + b)/(c·z + d)."""
    require(abs(a * d - b * c) > 1e-12, "Möbius coefficients are degenerate (ad − bc = 0)")
    return rational_function([b, a], [d, c])


# -- circles on the sphere --------------------------------------------------


@dataclass(frozen=True)
class CircleOnSphere:
    """A Euclidean circle, or a line (a circle through ∞) as in `measure.Line`."""

    kind: str
    center: complex = 0j
    radius: float = 1.0
    theta: float = 0.0
    x: float = 0.0

    def __post_init__(self):
        require(self.kind in ("circle", "line"), f"unknown circle kind {self.kind!r}")
        if self.kind == "circle":
            require(self.radius > 0 and math.isfinite(self.radius), "circle radius must be positive")
        else:
            Line(self.theta, self.x)

    @classmethod
    def circle(cls, center: complex, radius: float) -> "CircleOnSphere":
        return cls("circle", center=complex(center), radius=float(radius))

    @classmethod
    def line(cls, theta: float, x: float) -> "CircleOnSphere":
        ln = Line.normalized(theta, x)
        return cls("line", theta=ln.theta, x=ln.x)

    def homogeneous(self, t: float) -> tuple[complex, complex]:
        """(a, b) with w(t) = a/b; lines reach ∞ at t = π."""
        if self.kind == "circle":
            return self.center + self.radius * np.exp(1j * t), 1.0 + 0j
        n = np.exp(1j * self.theta)
        return self.x * n * math.cos(t / 2) + 1j * n * math.sin(t / 2), math.cos(t / 2) + 0j

    def parameter(self, A: complex, B: complex, tol: float) -> float | None:
        """t with w(t) = A/B, or None when A/B is not on the circle."""
        infinite = abs(B) <= 1e-14 * abs(A)
        if self.kind == "circle":
            if infinite:
                return None
            w = A / B
            if abs(abs(w - self.center) - self.radius) > tol * (1.0 + self.radius):
                return None
            return float(np.mod(np.angle(w - self.center), TWO_PI))
        if infinite:
            return math.pi
        w = (A / B) * np.exp(-1j * self.theta)
        if abs(w.real - self.x) > tol * (1.0 + abs(w)):
            return None
        return float(np.mod(2.0 * math.atan(w.imag), TWO_PI))

    def to_dict(self) -> dict:
        if self.kind == "circle":
            return {"kind": "circle", "center": [self.center.real, self.center.imag], "radius": self.radius}
        return {"kind": "line", "theta": self.theta, "x": self.x}


# -- preimages --------------------------------------------------------------


def _polish(g: np.ndarray, roots: np.ndarray) -> np.ndarray:
    """Newton steps on each root in the chart where it is well conditioned; sphere points out."""
    rev = g[::-1]
    dg, drev = P.polyder(g), P.polyder(rev)
    out = np.empty((roots.size, 3))
    for k, zk in enumerate(roots):
        inverted = abs(zk) > 1.0
        coeffs, dcoeffs = (rev, drev) if inverted else (g, dg)
        x = 1.0 / zk if inverted else zk
        fx = P.polyval(x, coeffs)
        for _ in range(3):
            dfx = P.polyval(x, dcoeffs)
            if fx == 0 or dfx == 0:
                break
            nx = x - fx / dfx
            fn = P.polyval(nx, coeffs)
            if abs(fn) >= abs(fx):
                break
            x, fx = nx, fn
        out[k] = inverted_to_sphere(x)[0] if inverted else plane_to_sphere(x)[0]
    return out


def sphere_roots(g: np.ndarray, d: int) -> np.ndarray:
    """The d roots on the sphere of Σ g_k z^k (length d + 1); missing degree sits at ∞."""
    g = np.asarray(g, dtype=complex)
    scale = float(np.max(np.abs(g)))
    top = g.size - 1
    while top > 0 and abs(g[top]) <= 1e-14 * scale:
        top -= 1
    finite = P.polyroots(g[: top + 1]) if top > 0 else np.empty(0, dtype=complex)
    pts = _polish(g, finite)
    if finite.size < d:
        pts = np.vstack([pts, np.tile(NORTH, (d - finite.size, 1))])
    return pts


def preimages(f: RationalFunction, C: CircleOnSphere, t: float) -> np.ndarray:
    """Sphere points of f^{-1}(w(t)), shape (d, 3)."""
    a, b = C.homogeneous(t)
    num, den = f.padded()
    return sphere_roots(b * num - a * den, f.degree)


def _cluster(points: np.ndarray, tol: float) -> list[list[int]]:
    if len(points) == 0:
        return []
    if len(points) == 1:
        return [[0]]
    close = squareform(pdist(points)) < tol
    n, labels = connected_components(csr_matrix(close), directed=False)
    return [np.flatnonzero(labels == k).tolist() for k in range(n)]


def homogeneous_to_sphere(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Sphere points of A/B, with B = 0 at the north pole."""
    A = np.atleast_1d(np.asarray(A, dtype=complex))
    B = np.atleast_1d(np.asarray(B, dtype=complex))
    out = np.empty((A.size, 3))
    low = np.abs(A) <= np.abs(B)
    if np.any(low):
        out[low] = plane_to_sphere(A[low] / B[low])
    if np.any(~low):
        out[~low] = inverted_to_sphere(B[~low] / A[~low])
    return out


def _coincident_critical(crit: np.ndarray, images: np.ndarray, spread: float) -> list[list[int]]:
    groups = []
    for group in _cluster(crit, spread):
        for sub in _cluster(images[group], CRITICAL_VALUE_TOL):
            groups.append([group[k] for k in sub])
    return groups


@dataclass(frozen=True, eq=False)
class CriticalJunction:
    center: np.ndarray  # sphere point
    multiplicity: int
    parameter: float


def critical_points(f: RationalFunction) -> np.ndarray:
    """The 2d − 2 critical points on the sphere (with multiplicity), shape (2d − 2, 3)."""
    W = f.wronskian()
    scale = float(np.max(np.abs(W))) if W.size else 0.0
    top = W.size - 1
    while top > 0 and abs(W[top]) <= 1e-13 * scale:
        top -= 1
    finite = P.polyroots(W[: top + 1]) if top > 0 else np.empty(0, dtype=complex)
    n_inf = 2 * f.degree - 2 - finite.size
    pts = plane_to_sphere(finite) if finite.size else np.empty((0, 3))
    if n_inf > 0:
        pts = np.vstack([pts, np.tile(NORTH, (n_inf, 1))])
    return pts


def critical_junctions(f: RationalFunction, C: CircleOnSphere, tol: float) -> list[CriticalJunction]:
    """Critical points whose value lies on C, clustered."""
    crit = critical_points(f)
    if len(crit) == 0:
        return []
    images = homogeneous_to_sphere(*f.homogeneous(crit))
    spread = multiple_root_spread(1.0, 2 * f.degree - 2, CRITICAL_CLUSTER_TOL)
    junctions = []
    for group in _coincident_critical(crit, images, spread):
        center = crit[group].mean(axis=0)
        center /= np.linalg.norm(center)
        A, B = f.homogeneous(center)
        t = C.parameter(complex(A[0]), complex(B[0]), tol)
        if t is not None:
            junctions.append(CriticalJunction(center, len(group), t))
    return junctions


def _canonical_order(Y: np.ndarray) -> np.ndarray:
    args = np.round(np.mod(np.arctan2(Y[:, 1], Y[:, 0]), TWO_PI), 10)
    return Y[np.lexsort((np.round(Y[:, 2], 10), args))]


@dataclass
class _Cut:
    parameter: float
    points: np.ndarray  # (d, 3), junction branches snapped
    slot_vertex: list[int]


def _build_cut(f, C, t, junctions, graph) -> _Cut:
    Y = preimages(f, C, t)
    snapped = np.zeros(len(Y), dtype=bool)
    slot_vertex = [-1] * len(Y)
    for jn in junctions:
        if abs(np.mod(jn.parameter - t + math.pi, TWO_PI) - math.pi) > 10 * PHASE_MERGE_TOL:
            continue
        order = np.argsort(np.linalg.norm(Y - jn.center, axis=1))
        order = [k for k in order if not snapped[k]][: jn.multiplicity + 1]
        vid = graph.add_vertex(jn.center.copy(), t, int(order[0]) if order else 0)
        for k in order:
            Y[k] = jn.center
            snapped[k] = True
            slot_vertex[k] = vid
    for k in range(len(Y)):
        if slot_vertex[k] < 0:
            slot_vertex[k] = graph.add_vertex(Y[k].copy(), t, k)
    return _Cut(t, Y, slot_vertex)


def _coincident(Y: np.ndarray) -> np.ndarray:
    D = squareform(pdist(Y)) if len(Y) > 1 else np.zeros((1, 1))
    np.fill_diagonal(D, np.inf)
    return D <= COINCIDENT_TOL


def _match(Y_old: np.ndarray, Y_new: np.ndarray, opts: SphereOptions) -> np.ndarray | None:
    """Assignment old → new, or None when a step is too long or ambiguous.

    Swaps among coincident points (junction branches) are harmless, so those
    are not counted as competitors.
    """
    D = chordal_distance(Y_old, Y_new)
    _, cols = linear_sum_assignment(D)
    moved = D[np.arange(len(Y_old)), cols]
    same_old = _coincident(Y_old)
    same_new = _coincident(Y_new)
    owner = np.empty(len(cols), dtype=int)
    owner[cols] = np.arange(len(cols))
    for k in range(len(Y_old)):
        at_junction = bool(same_old[k].any() or same_new[cols[k]].any())
        if moved[k] > (opts.junction_step_max if at_junction else opts.step_max):
            return None
        competitors = [
            j for j in range(len(Y_new))
            if j != cols[k] and not same_new[cols[k], j] and not same_old[k, owner[j]]
        ]
        if competitors and moved[k] >= 0.5 * float(np.min(D[k, competitors])):
            return None
    return cols


def _continue(f, C, t_start, t_end, start, end, opts: SphereOptions):
    """Carry the d strands from `start` (at t_start) to `end` (at t_end).

    Returns (paths, params, end_index) as `levelset` does for its arcs.
    """
    total = t_end - t_start
    Y = np.array(start)
    d = len(Y)
    progress = 0.0
    h = min(opts.param_step_max, total)
    paths: list[list[np.ndarray]] = [[] for _ in range(d)]
    params: list[float] = []

    for _ in range(opts.max_steps):
        remaining = total - progress
        h = min(h, opts.param_step_max)
        if h >= remaining - 1e-15:
            cols = _match(Y, end, opts)
            if cols is not None:
                return paths, params, cols
            h = remaining / 2.0
        else:
            t_new = t_start + progress + h
            Y_new = preimages(f, C, t_new)
            cols = _match(Y, Y_new, opts)
            if cols is not None:
                Y = Y_new[cols]
                progress += h
                for k in range(d):
                    paths[k].append(Y[k].copy())
                params.append(t_new)
                h *= 1.5
                continue
            h /= 2.0
        if h < opts.min_param_step:
            t = t_start + progress
            a, b = C.homogeneous(t)
            w = "inf" if abs(b) <= 1e-14 * abs(a) else [float((a / b).real), float((a / b).imag)]
            raise ContinuationError(
                "preimage branches could not be separated",
                location={"t": float(np.mod(t, TWO_PI)), "w": w},
            )
    raise ContinuationError(
        f"step budget of {opts.max_steps} exhausted",
        location={"t": float(np.mod(t_start + progress, TWO_PI))},
    )


# -- curves -----------------------------------------------------------------


def _chart_flags(points: np.ndarray, chart_radius: float) -> np.ndarray:
    """Per-vertex chart with hysteresis: switch once |z| (or |1/z|) passes √R."""
    switch = math.sqrt(chart_radius)
    flags = np.empty(len(points), dtype=bool)
    inverted = bool(points[0, 2] > 0)
    for k, pt in enumerate(points):
        z = sphere_to_chart(pt, inverted)[0]
        if abs(z) > switch:
            inverted = not inverted
        flags[k] = inverted
    return flags


def _segment_lengths(zeta_a: np.ndarray, zeta_b: np.ndarray) -> np.ndarray:
    """Midpoint rule for 2|dζ|/(1 + |ζ|²); the same form in either chart."""
    mid = 0.5 * (zeta_a + zeta_b)
    return 2.0 * np.abs(zeta_b - zeta_a) / (1.0 + np.abs(mid) ** 2)


@dataclass(frozen=True, eq=False)
class SphericalCurve:
    components: list[np.ndarray]  # closed polylines in chart coordinates
    charts: list[np.ndarray]  # True where the vertex is stored as u = 1/z
    degree: int
    spherical_length: float
    chart_radius: float = SphereOptions.chart_radius
    junctions: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def from_sphere_points(
        cls, polylines: Sequence[np.ndarray], degree: int = 1,
        chart_radius: float = SphereOptions.chart_radius, junctions=(),
    ) -> "SphericalCurve":
        comps, charts = [], []
        for pts in polylines:
            pts = np.atleast_2d(np.asarray(pts, dtype=float))
            flags = _chart_flags(pts, chart_radius)
            comps.append(sphere_to_chart(pts, flags))
            charts.append(flags)
        curve = cls(comps, charts, degree, 0.0, chart_radius, list(junctions))
        object.__setattr__(curve, "spherical_length", spherical_length(curve))
        return curve

    @classmethod
    def from_plane_polylines(cls, polylines: Sequence[Sequence[complex]], degree: int = 1,
                             chart_radius: float = SphereOptions.chart_radius) -> "SphericalCurve":
        return cls.from_sphere_points([plane_to_sphere(c) for c in polylines], degree, chart_radius)

    @property
    def component_count(self) -> int:
        return len(self.components)

    @property
    def vertex_count(self) -> int:
        return sum(len(c) for c in self.components)

    def sphere_points(self) -> list[np.ndarray]:
        out = []
        for zeta, inv in zip(self.components, self.charts):
            pts = np.empty((len(zeta), 3))
            if np.any(~inv):
                pts[~inv] = plane_to_sphere(zeta[~inv])
            if np.any(inv):
                pts[inv] = inverted_to_sphere(zeta[inv])
            out.append(pts)
        return out

    def plane_points(self) -> list[np.ndarray]:
        """Plane-chart coordinates, ∞ as nan."""
        out = []
        for zeta, inv in zip(self.components, self.charts):
            with np.errstate(divide="ignore", invalid="ignore"):
                z = np.where(inv, 1.0 / zeta, zeta)
            z[~np.isfinite(z)] = np.nan
            out.append(z)
        return out

    def chart_switches(self) -> int:
        return int(sum(np.count_nonzero(np.diff(c.astype(int))) for c in self.charts))

    def to_dict(self, include_points: bool = False) -> dict:
        out = {
            "degree": self.degree,
            "spherical_length": self.spherical_length,
            "component_count": self.component_count,
            "vertex_count": self.vertex_count,
            "chart_switches": self.chart_switches(),
            "chart_radius": self.chart_radius,
        }
        if include_points:
            out["components"] = [
                [[float(z.real), float(z.imag), bool(inv)] for z, inv in zip(zeta, flags)]
                for zeta, flags in zip(self.components, self.charts)
            ]
        return out


def polyline_spherical_length(points: Sequence[complex], closed: bool = False) -> float:
    """Spherical length of a plane-chart polyline."""
    z = np.asarray(points, dtype=complex)
    if z.size < 2:
        return 0.0
    a, b = (z, np.roll(z, -1)) if closed else (z[:-1], z[1:])
    return float(np.sum(_segment_lengths(a, b)))


def spherical_length(curve: SphericalCurve) -> float:
    """Σ 2|Δζ|/(1 + |ζ_mid|²) over every closed-polyline edge.

    An edge is measured in the chart of its first vertex.
    """
    total = 0.0
    for zeta, inv in zip(curve.components, curve.charts):
        if len(zeta) < 2:
            continue
        nxt_zeta, nxt_inv = np.roll(zeta, -1), np.roll(inv, -1)
        switched = nxt_inv != inv
        with np.errstate(divide="ignore", invalid="ignore"):
            other = np.where(switched, 1.0 / nxt_zeta, nxt_zeta)
        total += float(np.sum(_segment_lengths(zeta, other)))
    return total


def preimage_trace(
    f: RationalFunction, C: CircleOnSphere, options: SphereOptions | None = None
) -> SphericalCurve:
    """Trace f^{-1}(C) on the sphere."""
    opts = options or SphereOptions()
    opts.validate()
    d = f.degree
    junctions = critical_junctions(f, C, opts.critical_tol)
    cuts = _merge_phases([jn.parameter for jn in junctions])
    graph = _Graph()

    if not cuts:
        start = _canonical_order(preimages(f, C, 0.0))
        paths, params, end_index = _continue(f, C, 0.0, TWO_PI, start, start, opts)
        start_ids = [graph.add_vertex(y.copy(), 0.0, k) for k, y in enumerate(start)]
        _link_paths(graph, start_ids, [start_ids[s] for s in end_index], paths, params)
    else:
        built = [_build_cut(f, C, t, junctions, graph) for t in cuts]
        for j, cut in enumerate(built):
            nxt = built[(j + 1) % len(built)]
            t_end = nxt.parameter + (TWO_PI if j + 1 == len(built) else 0.0)
            paths, params, end_index = _continue(f, C, cut.parameter, t_end, cut.points, nxt.points, opts)
            _link_paths(graph, cut.slot_vertex, [nxt.slot_vertex[s] for s in end_index], paths, params)

    comps, _, _ = _components(graph)
    logger.debug("traced degree-%d preimage: %d components, %d vertices", d, len(comps), len(graph.points))
    return SphericalCurve.from_sphere_points(
        comps, d, opts.chart_radius, junctions=[jn.center for jn in junctions]
    )


# -- integral geometry --------------------------------------------------------


def _segment_endpoints(curve: SphericalCurve) -> tuple[np.ndarray, np.ndarray]:
    pts = curve.sphere_points()
    if not pts:
        return np.empty((0, 3)), np.empty((0, 3))
    return np.vstack(pts), np.vstack([np.roll(p, -1, axis=0) for p in pts])


def _crossings(starts: np.ndarray, ends: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Edges whose ends fall on opposite sides of each great circle x·y = 0.

    Points within 1e-12 of the circle count as on its positive side.
    """
    sa = xs @ starts.T < -1e-12
    sb = xs @ ends.T < -1e-12
    return np.count_nonzero(sa != sb, axis=1)


def great_circle_intersections(curve: SphericalCurve, x: Sequence[float]) -> int:
    """Crossings of the curve with the great circle centred at x."""
    x = np.asarray(x, dtype=float)
    require(x.shape == (3,) and np.linalg.norm(x) > 0, "sphere point must be a non-zero 3-vector")
    x = x / np.linalg.norm(x)
    starts, ends = _segment_endpoints(curve)
    if starts.size and np.any(np.abs(starts @ x) <= 1e-12):
        logger.debug("great circle centred at %s passes through a vertex", np.array2string(x, precision=6))
    count = int(_crossings(starts, ends, x[None, :])[0]) if starts.size else 0
    if count > 2 * curve.degree:
        logger.warning("great circle centred at %s meets the curve %d times, above 2d=%d",
                       np.array2string(x, precision=6), count, 2 * curve.degree)
    return count


def sample_sphere(n: int, seed: int) -> np.ndarray:
    """n uniform points on S² from normalised Gaussian triples."""
    g = np.random.default_rng(seed).normal(size=(n, 3))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def poincare_length(
    curve: SphericalCurve, n_samples: int = SphereOptions.n_samples, seed: int = 0, batch: int = 256
) -> tuple[float, float]:
    """π·mean v(E, x) over uniform x, with its standard error."""
    require(n_samples >= 100, f"Poincaré estimate needs at least 100 samples, got {n_samples}")
    xs = sample_sphere(n_samples, seed)
    starts, ends = _segment_endpoints(curve)
    if not starts.size:
        return 0.0, 0.0
    counts = np.concatenate([_crossings(starts, ends, xs[i:i + batch]) for i in range(0, n_samples, batch)])
    over = int(np.count_nonzero(counts > 2 * curve.degree))
    if over:
        logger.warning("%d of %d great circles meet the curve more than 2d=%d times",
                       over, n_samples, 2 * curve.degree)
    return float(math.pi * counts.mean()), float(math.pi * counts.std(ddof=1) / math.sqrt(n_samples))


@dataclass(frozen=True)
class Theorem2Check:
    holds: bool
    spherical_length: float
    bound: float
    degree: int

    def to_dict(self) -> dict:
        return {
            "holds": self.holds,
            "spherical_length": self.spherical_length,
            "bound": self.bound,
            "degree": self.degree,
        }


def check_theorem2(
    f: RationalFunction, C: CircleOnSphere, options: SphereOptions | None = None,
    curve: SphericalCurve | None = None,
) -> Theorem2Check:
    """Spherical length of f^{-1}(C) against d great circles (2πd)."""
    curve = curve or preimage_trace(f, C, options)
    bound = TWO_PI * f.degree
    length = curve.spherical_length
    holds = length <= bound + 1e-3
    if not holds:
        logger.warning("preimage spherical length %.6f exceeds 2πd = %.6f", length, bound)
    return Theorem2Check(holds, length, bound, f.degree)


def verify_theorem2(f: RationalFunction, C: CircleOnSphere, options: SphereOptions | None = None) -> bool:
    return check_theorem2(f, C, options).holds
