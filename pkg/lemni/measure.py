"""Length of E(p) three ways, and the quantitative bounds around it.

|E(p)| = ∫_0^{2π} Σ_k 1/|p′(z_k(θ))| dθ, where z_k(θ) are the preimages of
e^{iθ}: the integrand is the sum of |(p^{-1})′| over all branches. It blows
up like |θ − θ_c|^{-1/2} at critical phases, which is integrable.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .config_utils import config_dataclass
from .error_handling import QuadratureError, require
from .geometry import ALPHA0_BOUND, convex_hull
from .levelset import LevelCurve, TraceOptions, _merge_phases, trace, wrap_phase
from .poly import (
    MonicPolynomial,
    cluster_indices,
    critical_values,
    solve_preimages_many,
)

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
CONJECTURED_ALPHA0 = 3.0 ** 1.5 * 2.0 ** (2.0 / 3.0)
BERNOULLI_LENGTH = 7.416


def alpha0_bound() -> float:
    """π(√10 − 3√2 + 4): hull-perimeter bound for connected sets of capacity 1."""
    return ALPHA0_BOUND


def borwein_bound(d: int) -> float:
    return 8.0 * math.pi * math.e * d


def bernoulli_reference() -> float:
    """2^{5/2} ∫_0^1 dx/√(1 − x⁴), the length of |z² + 1| = 1."""
    value, _ = integrate.quad(lambda x: 1.0 / math.sqrt(1.0 - x ** 4), 0.0, 1.0)
    return 2.0 ** 2.5 * value


@config_dataclass("length")
class LengthOptions:
    tol: float = 1e-8  # quadrature target: error <= tol * (1 + length)
    max_level: int = 12  # tanh-sinh refinement levels per interval (nodes double per level)
    accept_tol: float = 1e-2  # relative error an unconverged interval may still be reported with
    split_radius: float = 0.5  # also split at critical phases with | |a| - 1 | below this
    crofton_n_theta: int = 256
    crofton_n_x: int = 256


@dataclass(frozen=True)
class Line:
    """The line {z : Re(z·e^{−iθ}) = x}."""

    theta: float
    x: float

    def __post_init__(self):
        require(0.0 <= self.theta < math.pi, f"line normal direction {self.theta} not in [0, π)")

    @classmethod
    def normalized(cls, theta: float, x: float) -> "Line":
        theta = math.fmod(theta, TWO_PI)
        if theta < 0:
            theta += TWO_PI
        if theta >= math.pi:
            theta, x = theta - math.pi, -x
        return cls(theta, x)

    def signed_offset(self, z):
        return np.real(np.asarray(z) * np.exp(-1j * self.theta)) - self.x


# -- exact integral ---------------------------------------------------------


def _breakpoints(p: MonicPolynomial, split_radius: float) -> list[float]:
    if p.degree < 2:
        return []
    values = critical_values(p)
    near = np.abs(np.abs(values) - 1.0) <= split_radius
    return _merge_phases([wrap_phase(float(np.angle(a))) for a in values[near]])


def _speed(p: MonicPolynomial, theta: np.ndarray) -> np.ndarray:
    """Σ_k 1/|p′(z_k(θ))| at every θ, vectorized over the preimage solves."""
    theta = np.asarray(theta, dtype=float)
    z = solve_preimages_many(p, np.exp(1j * theta.ravel()))
    with np.errstate(divide="ignore"):
        speed = np.sum(1.0 / np.abs(p.derivative(z)), axis=1)
    # a node may land on a critical point
    return np.where(np.isfinite(speed), speed, 0.0).reshape(theta.shape)


def _integrate(p: MonicPolynomial, edges: Sequence[float], atol: float, rtol: float,
               options: LengthOptions) -> tuple[np.ndarray, np.ndarray]:
    """Tanh-sinh quadrature over every [edges[k], edges[k+1]] at once.

    θ = lo + (hi − lo)·sin²(πu/2) flattens the square-root blow-up at both
    ends of each interval.
    """
    lo = np.asarray(edges[:-1], dtype=float)
    hi = np.asarray(edges[1:], dtype=float)

    def f(u, lo, hi):
        theta = lo + (hi - lo) * np.sin(0.5 * np.pi * u) ** 2
        return _speed(p, theta) * (hi - lo) * 0.5 * np.pi * np.sin(np.pi * u)

    res = integrate.tanhsinh(
        f, np.zeros_like(lo), np.ones_like(hi), args=(lo, hi),
        atol=atol, rtol=rtol, maxlevel=options.max_level,
    )
    values = np.atleast_1d(res.integral)
    errors = np.atleast_1d(res.error)
    unconverged = np.flatnonzero(~np.atleast_1d(res.success))
    if unconverged.size:
        worst = int(unconverged[np.argmax(errors[unconverged])])
        location = {
            "theta_lo": float(lo[worst]),
            "theta_hi": float(hi[worst]),
            "panel_error": float(errors[worst]),
        }
        if not errors[worst] <= options.accept_tol * (1.0 + abs(values[worst])):
            raise QuadratureError("length quadrature did not converge within the refinement budget",
                                  location=location)
        logger.warning("length quadrature stopped above its tolerance: %s", location)
    return values, errors


def length_integral_with_error(
    p: MonicPolynomial, tol: float = LengthOptions.tol, options: LengthOptions | None = None
) -> tuple[float, float]:
    options = options or LengthOptions()
    require(tol > 0, "tol must be positive")
    cuts = _breakpoints(p, options.split_radius)
    edges = cuts + [cuts[0] + TWO_PI] if cuts else [0.0, TWO_PI]
    n = len(edges) - 1
    values, errors = _integrate(p, edges, tol / n, tol, options)
    total, total_err = float(np.sum(values)), float(np.sum(errors))
    logger.debug("length integral %.12g (est. error %.3g over %d intervals)", total, total_err, n)
    return total, total_err


def length_integral(p: MonicPolynomial, tol: float = LengthOptions.tol, options: LengthOptions | None = None) -> float:
    """|E(p)| by tanh-sinh quadrature over θ, split at the critical phases."""
    return length_integral_with_error(p, tol, options)[0]


def arc_length(p: MonicPolynomial, theta0: float, theta1: float, tol: float = 1e-8) -> float:
    """Length of the part of E(p) that p maps onto the arc [θ0, θ1] of T."""
    require(theta1 > theta0, "arc must have positive length")
    cuts = []
    for phase in _breakpoints(p, LengthOptions.split_radius):
        cuts.extend(c for c in (phase, phase + TWO_PI) if theta0 < c < theta1)
    edges = [theta0] + sorted(cuts) + [theta1]
    return float(np.sum(_integrate(p, edges, tol, tol, LengthOptions())[0]))


def arc_length_bound(d: int, delta: float) -> float:
    """16·d·e·(δ/2)^{1/d}: bound on the length above any arc of T of length δ < π/6."""
    require(0 < delta < math.pi / 6, "arc length must lie in (0, π/6)")
    return 16.0 * d * math.e * (delta / 2.0) ** (1.0 / d)


# -- polyline and integral-geometric estimates -------------------------------


def length_polyline(curve: LevelCurve) -> float:
    require(curve.vertex_count > 0, "curve is empty")
    a, b = curve.segments()
    return float(np.sum(np.abs(b - a)))


def _polyline_segments(polylines: Iterable[np.ndarray], closed: bool = True):
    starts, ends = [], []
    for poly in polylines:
        poly = np.asarray(poly, dtype=complex)
        if poly.size < 2:
            if poly.size == 1:
                starts.append(poly)
                ends.append(poly)
            continue
        if closed:
            starts.append(poly)
            ends.append(np.roll(poly, -1))
        else:
            starts.append(poly[:-1])
            ends.append(poly[1:])
    if not starts:
        return np.empty(0, dtype=complex), np.empty(0, dtype=complex)
    return np.concatenate(starts), np.concatenate(ends)


def crossing_counts(starts: np.ndarray, ends: np.ndarray, theta: float, xs: np.ndarray) -> np.ndarray:
    """Crossings of the segments with the lines Re(z e^{−iθ}) = x for every x in xs.

    A segment counts when x lies in the half-open range [min, max) of its
    endpoint offsets: a vertex exactly on the line is resolved by the sign
    change of its neighbours, and a segment lying on the line contributes
    nothing.
    """
    rot = np.exp(-1j * theta)
    sa = np.real(starts * rot)
    sb = np.real(ends * rot)
    lo = np.sort(np.minimum(sa, sb))
    hi = np.sort(np.maximum(sa, sb))
    return np.searchsorted(lo, xs, side="right") - np.searchsorted(hi, xs, side="right")


def crofton_from_segments(starts, ends, n_theta: int, n_x: int) -> tuple[float, float]:
    require(n_theta >= 8 and n_x >= 8, "need at least 8 directions and 8 offsets")
    require(starts.size > 0, "curve is empty")
    radius = float(np.max(np.abs(np.concatenate([starts, ends])))) + 1.0
    dx = 2.0 * radius / n_x
    xs = -radius + (np.arange(n_x) + 0.5) * dx
    thetas = (np.arange(n_theta) + 0.5) * math.pi / n_theta
    per_direction = np.array([crossing_counts(starts, ends, t, xs).sum() * dx for t in thetas])
    estimate = 0.5 * math.pi * float(per_direction.mean())
    stderr = 0.5 * math.pi * float(per_direction.std(ddof=1)) / math.sqrt(n_theta)
    return estimate, stderr


def crofton_length(
    curve: LevelCurve,
    n_theta: int = LengthOptions.crofton_n_theta,
    n_x: int = LengthOptions.crofton_n_x,
) -> tuple[float, float]:
    """½∫∫N(θ, x) dx dθ by the midpoint rule; returns (length, standard error)."""
    starts, ends = curve.segments()
    return crofton_from_segments(starts, ends, n_theta, n_x)


def polyline_crofton_length(points: Sequence[complex], n_theta: int = 256, n_x: int = 256) -> tuple[float, float]:
    starts, ends = _polyline_segments([np.asarray(points, dtype=complex)])
    return crofton_from_segments(starts, ends, n_theta, n_x)


def line_crossing_points(polylines: Iterable[np.ndarray], line: Line) -> np.ndarray:
    starts, ends = _polyline_segments(polylines)
    sa = line.signed_offset(starts)
    sb = line.signed_offset(ends)
    hit = (sa < 0) != (sb < 0)
    t = sa[hit] / (sa[hit] - sb[hit])
    return starts[hit] + t * (ends[hit] - starts[hit])


def line_intersection_count(
    p: MonicPolynomial, line: Line, curve: LevelCurve, merge_tol: float = 1e-6
) -> int:
    """Distinct points where the traced E(p) crosses `line`.

    A line through a traced vertex is shifted by 1e-9 first. Crossings closer
    than `merge_tol` are one point: branches through a touch point cross the
    line there once.
    """
    if np.any(np.abs(line.signed_offset(curve.vertices())) <= 1e-12):
        logger.debug("line (θ=%.6g, x=%.6g) passes through a vertex; shifted by 1e-9", line.theta, line.x)
        line = Line(line.theta, line.x + 1e-9)
    points = line_crossing_points(curve.components, line)
    count = len(cluster_indices(points, merge_tol)) if points.size else 0
    if count > 2 * p.degree:
        logger.warning("line (θ=%.6g, x=%.6g) meets E(p) %d times, above 2d=%d",
                       line.theta, line.x, count, 2 * p.degree)
    return count


def _interval_union_length(lo: np.ndarray, hi: np.ndarray) -> float:
    if lo.size == 0:
        return 0.0
    order = np.argsort(lo)
    lo, hi = lo[order], hi[order]
    reach = np.maximum.accumulate(hi)
    gaps = np.maximum(lo[1:] - reach[:-1], 0.0)
    return float(reach[-1] - lo[0] - gaps.sum())


def projection_measure(starts: np.ndarray, ends: np.ndarray) -> tuple[float, float]:
    """Lebesgue measure of the x- and y-projections of a union of segments."""
    px = _interval_union_length(np.minimum(starts.real, ends.real), np.maximum(starts.real, ends.real))
    py = _interval_union_length(np.minimum(starts.imag, ends.imag), np.maximum(starts.imag, ends.imag))
    return px, py


def projection_lengths(curve: LevelCurve) -> tuple[float, float]:
    require(curve.vertex_count > 0, "curve is empty")
    return projection_measure(*curve.segments())


def polyline_projection_lengths(points: Sequence[complex], closed: bool = True) -> tuple[float, float]:
    return projection_measure(*_polyline_segments([np.asarray(points, dtype=complex)], closed))


def projection_corollary_report(curve: LevelCurve, d: int) -> list[dict]:
    """Per component l: |l|, 2d(|π_x l| + |π_y l|) and 4d·diam(l)."""
    rows = []
    for comp in curve.components:
        starts, ends = _polyline_segments([comp])
        length = float(np.sum(np.abs(ends - starts)))
        px, py = projection_measure(starts, ends)
        diam = convex_hull(comp).diameter
        tol = 1e-6 * length
        rows.append({
            "length": length,
            "projection_bound": 2.0 * d * (px + py),
            "diameter_bound": 4.0 * d * diam,
            "holds": length <= 2.0 * d * (px + py) + tol and 2.0 * d * (px + py) <= 4.0 * d * diam + tol,
        })
    return rows


def verify_projection_corollary(curve: LevelCurve, d: int) -> bool:
    return all(row["holds"] for row in projection_corollary_report(curve, d))


# -- Cartan covering ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DiscCover:
    centers: np.ndarray
    radii: np.ndarray
    level: float
    degree: int

    @property
    def discs(self) -> list[tuple[complex, float]]:
        return [(complex(c), float(r)) for c, r in zip(self.centers, self.radii)]

    @property
    def total_radius(self) -> float:
        return float(np.sum(self.radii))

    @property
    def radius_budget(self) -> float:
        return 2.0 * math.e * self.level ** (1.0 / self.degree)

    @property
    def certified(self) -> bool:
        return self.total_radius <= self.radius_budget + 1e-9

    def covers(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=complex)
        return np.any(np.abs(pts[..., None] - self.centers) <= self.radii, axis=-1)

    def projection_bound(self) -> float:
        """Upper bound 4·Σr on |π_x| + |π_y| of the covered set."""
        return 4.0 * self.total_radius

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "total_radius": self.total_radius,
            "radius_budget": self.radius_budget,
            "certified": self.certified,
            "discs": [[c.real, c.imag, r] for c, r in self.discs],
        }


def projection_bound_sublevel(cover: DiscCover) -> float:
    """|π_x| + |π_y| of the sublevel set {|p| < M} is at most this (4·Σr)."""
    return cover.projection_bound()


def _candidate_centers(pts: np.ndarray) -> np.ndarray:
    """Roots, pairwise midpoints and triple circumcenters.

    The smallest disc holding a set of points is centred at one of these,
    so searching them decides exactly whether some disc of a given radius
    holds λ roots.
    """
    n = pts.size
    centers = [pts]
    if n >= 2:
        i, j = np.triu_indices(n, 1)
        centers.append((pts[i] + pts[j]) / 2.0)
    if n >= 3:
        a_idx, b_idx, c_idx = np.array([(a, b, c) for a in range(n) for b in range(a + 1, n) for c in range(b + 1, n)]).T
        a, b, c = pts[a_idx], pts[b_idx], pts[c_idx]
        b_rel, c_rel = b - a, c - a
        denom = 2.0 * np.imag(np.conj(b_rel) * c_rel)
        ok = np.abs(denom) > 1e-14
        num = 1j * (np.abs(b_rel[ok]) ** 2 * c_rel[ok] - np.abs(c_rel[ok]) ** 2 * b_rel[ok])
        centers.append(a[ok] + num / denom[ok])
    return np.concatenate(centers)


def cartan_cover(p: MonicPolynomial, M: float) -> DiscCover:
    """Discs with total radius 2e·M^{1/d} covering {|p| < M} (greedy Cartan construction)."""
    require(M > 0, "level M must be positive")
    d = p.degree
    h = math.e * M ** (1.0 / d) / d
    remaining = np.array(p.roots, dtype=complex)
    centers, radii = [], []
    while remaining.size:
        n = remaining.size
        cand = _candidate_centers(remaining)
        dist = np.abs(cand[:, None] - remaining[None, :])
        sorted_dist = np.sort(dist, axis=1)
        tol = 1e-12 * (1.0 + h)
        lam = next(
            k for k in range(n, 0, -1)
            if np.any(sorted_dist[:, k - 1] <= k * h + tol)
        )
        best = int(np.argmin(sorted_dist[:, lam - 1]))
        taken = np.argsort(dist[best])[:lam]
        centers.append(cand[best])
        radii.append(2.0 * lam * h)
        remaining = np.delete(remaining, taken)
    return DiscCover(np.array(centers), np.array(radii), float(M), d)


def cluster_split(roots: Sequence[complex], M: float) -> tuple[np.ndarray, np.ndarray] | None:
    """Split Z into two parts more than 4M apart, via discs of radius 2M at the roots.

    Returns None when the union of discs is connected (then diam Z ≤ 4Md).
    """
    pts = np.asarray(roots, dtype=complex)
    tree = cKDTree(np.column_stack([pts.real, pts.imag]))
    pairs = tree.query_pairs(4.0 * M, output_type="ndarray")
    n = pts.size
    adj = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])) if len(pairs) else ([], ([], [])), shape=(n, n))
    count, labels = connected_components(adj, directed=False)
    if count < 2:
        return None
    first = labels == labels[0]
    return pts[first], pts[~first]


# -- Theorem-level report --------------------------------------------------------


@dataclass(frozen=True)
class LengthReport:
    exact_integral: float
    exact_error: float
    polyline: float
    crofton: float
    crofton_stderr: float
    degree: int
    connected: bool
    component_count: int
    hull_perimeter: float
    bound_alpha0: float = ALPHA0_BOUND
    satisfies_borwein: bool = True
    extra: dict = field(default_factory=dict)

    @property
    def satisfies_theorem1(self) -> bool:
        return self.exact_integral <= self.bound_alpha0 * self.degree + 1e-6

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "exact_integral": self.exact_integral,
            "exact_error": self.exact_error,
            "polyline": self.polyline,
            "crofton": self.crofton,
            "crofton_stderr": self.crofton_stderr,
            "bound_alpha0": self.bound_alpha0,
            "bound_alpha0_d": self.bound_alpha0 * self.degree,
            "satisfies_theorem1": self.satisfies_theorem1,
            "borwein_bound_d": borwein_bound(self.degree),
            "satisfies_borwein": self.satisfies_borwein,
            "connected": self.connected,
            "component_count": self.component_count,
            "hull_perimeter": self.hull_perimeter,
            **self.extra,
        }


def verify_theorem1(
    p: MonicPolynomial,
    tol: float = LengthOptions.tol,
    options: LengthOptions | None = None,
    trace_options: TraceOptions | None = None,
    curve: LevelCurve | None = None,
) -> LengthReport:
    """All three length estimates of E(p) against α₀·d and Borwein's 8πe·d."""
    options = options or LengthOptions()
    curve = curve or trace(p, trace_options)
    exact, err = length_integral_with_error(p, tol, options)
    crofton, stderr = crofton_length(curve, options.crofton_n_theta, options.crofton_n_x)
    return LengthReport(
        exact_integral=exact,
        exact_error=err,
        polyline=length_polyline(curve),
        crofton=crofton,
        crofton_stderr=stderr,
        degree=p.degree,
        connected=curve.component_count == 1,
        component_count=curve.component_count,
        hull_perimeter=convex_hull(curve.vertices()).perimeter,
        satisfies_borwein=exact <= borwein_bound(p.degree),
    )
