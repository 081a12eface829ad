"""Monic complex polynomials stored by their roots.

Coefficient arrays are ascending (constant term first, leading 1 last),
matching `numpy.polynomial.polynomial`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import pdist, squareform

from .config_utils import config_dataclass
from .error_handling import RootSolverError, ValidationError, require

logger = logging.getLogger(__name__)

_EPS = np.finfo(float).eps


@config_dataclass("poly")
class PolyOptions:
    max_degree: int = 64  # coefficient dynamic range stays within double precision
    residual_tol: float = 1e-10  # scaled residual accepted by the root finder
    restarts: int = 3  # fresh starts after the first attempt fails
    max_iter: int = 500  # Aberth iterations per attempt
    cluster_tol: float = 1e-7  # roots closer than this are reported as one cluster


DEFAULT_POLY_OPTIONS = PolyOptions()


@dataclass(frozen=True, eq=False)
class MonicPolynomial:
    """p(z) = Π (z − z_j); `coeffs` cached in ascending order, coeffs[-1] == 1."""

    roots: np.ndarray
    coeffs: np.ndarray = field(repr=False)

    @property
    def degree(self) -> int:
        return len(self.roots)

    def __call__(self, z):
        return evaluate(self, z)

    def derivative(self, z):
        """p′(z), vectorized."""
        return P.polyval(np.asarray(z, dtype=complex), self.derivative_coeffs)

    @property
    def derivative_coeffs(self) -> np.ndarray:
        return P.polyder(self.coeffs)

    def evaluate_product(self, z):
        """Root-product evaluation; the oracle for the Horner value."""
        z = np.asarray(z, dtype=complex)
        return np.prod(z[..., None] - self.roots, axis=-1)

    def shifted(self, c: complex) -> "MonicPolynomial":
        return from_roots(self.roots + c)

    def rotated(self, alpha: float) -> "MonicPolynomial":
        return from_roots(self.roots * np.exp(1j * alpha))

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "roots": [[float(r.real), float(r.imag)] for r in self.roots],
            "coeffs": [[float(c.real), float(c.imag)] for c in self.coeffs],
        }

    def __repr__(self) -> str:
        return f"MonicPolynomial(roots={np.array2string(self.roots, precision=6)})"


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


def _check_finite(values: np.ndarray, what: str) -> None:
    require(bool(np.all(np.isfinite(values))), f"{what} must be finite")


def from_roots(
    roots: Sequence[complex], options: PolyOptions = DEFAULT_POLY_OPTIONS
) -> MonicPolynomial:
    """Build p from its root vector Z, keeping the input order."""

    roots = np.atleast_1d(np.asarray(roots, dtype=complex))
    if roots.size == 0:
        raise ValidationError("degree-zero polynomial: the root list is empty")
    require(
        roots.size <= options.max_degree,
        f"degree {roots.size} exceeds the cap of {options.max_degree}",
    )
    _check_finite(roots, "roots")
    coeffs = P.polyfromroots(roots).astype(complex)
    coeffs[-1] = 1.0
    return MonicPolynomial(_frozen(roots), _frozen(coeffs))


def from_coefficients(
    coeffs: Sequence[complex],
    options: PolyOptions = DEFAULT_POLY_OPTIONS,
    seed: int = 0,
) -> MonicPolynomial:
    """Build p from ascending coefficients; the last one must be 1."""

    coeffs = np.atleast_1d(np.asarray(coeffs, dtype=complex))
    require(coeffs.size >= 2, "degree-zero polynomial: need at least two coefficients")
    _check_finite(coeffs, "coefficients")
    require(
        abs(coeffs[-1] - 1.0) <= 1e-12,
        f"polynomial is not monic: leading coefficient {coeffs[-1]}",
    )
    d = coeffs.size - 1
    require(d <= options.max_degree, f"degree {d} exceeds the cap of {options.max_degree}")
    coeffs = coeffs.copy()
    coeffs[-1] = 1.0
    roots = aberth_roots(coeffs, options=options, seed=seed)
    return MonicPolynomial(_frozen(roots), _frozen(coeffs))


def evaluate(p: MonicPolynomial, z):
    """Horner value of p at z (scalar or array)."""
    return P.polyval(np.asarray(z, dtype=complex), p.coeffs)


def residual_scale(coeffs: np.ndarray, z: np.ndarray) -> np.ndarray:
    """1 + Σ|c_k||z|^k: the magnitude a residual at z is measured against."""
    return 1.0 + P.polyval(np.abs(z), np.abs(coeffs))


def _initial_guesses(coeffs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    d = coeffs.size - 1
    radius = 1.0 + np.max(np.abs(coeffs[:-1]))
    phases = 2 * np.pi * (np.arange(d) + rng.uniform(0.0, 1.0, d)) / d
    return radius * np.exp(1j * (phases + rng.uniform(0, 2 * np.pi)))


def _separate(z: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Nudge coincident starting points apart; Aberth divides by their gaps."""
    if z.size < 2:
        return z
    z = z.copy()
    gaps = squareform(pdist(np.column_stack([z.real, z.imag])))
    np.fill_diagonal(gaps, np.inf)
    scale = 1e-9 * (1.0 + np.abs(z))
    crowded = np.min(gaps, axis=1) < scale
    if np.any(crowded):
        n = int(np.count_nonzero(crowded))
        z[crowded] += scale[crowded] * np.exp(2j * np.pi * rng.uniform(0, 1, n))
    return z


POLISH_ITER = 120  # extra iterations once the residual passes; clustered roots converge linearly


def _aberth_iterate(coeffs, dcoeffs, z, tol, max_iter):
    d = z.size
    polish = None
    for it in range(max_iter + POLISH_ITER):
        pz = P.polyval(z, coeffs)
        if polish is None:
            if np.all(np.abs(pz) <= tol * residual_scale(coeffs, z)):
                polish = 0
            elif it >= max_iter:
                break
        else:
            polish += 1
            if polish > POLISH_ITER or np.all(pz == 0):
                break
        dpz = P.polyval(z, dcoeffs)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = pz / dpz
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, 1.0)
            inv = 1.0 / diff
            np.fill_diagonal(inv, 0.0)
            repulsion = inv.sum(axis=1) if d > 1 else np.zeros(1, dtype=complex)
            step = ratio / (1.0 - ratio * repulsion)
        step = np.where(np.isfinite(step), step, 0.0)
        candidate = z - step
        if polish is not None and _worst_residual(coeffs, candidate) > tol:
            break
        z = candidate
        if np.all(np.abs(step) <= 4 * _EPS * (1.0 + np.abs(z))):
            break
    return z, it


def _worst_residual(coeffs, z) -> float:
    with np.errstate(invalid="ignore", over="ignore"):
        r = np.abs(P.polyval(z, coeffs)) / residual_scale(coeffs, z)
    return float(np.nanmax(r)) if np.any(np.isfinite(r)) else float("inf")


def aberth_roots(
    coeffs: np.ndarray,
    *,
    options: PolyOptions = DEFAULT_POLY_OPTIONS,
    hint: np.ndarray | None = None,
    seed: int = 0,
    location: dict | None = None,
) -> np.ndarray:
    """All d roots of a monic polynomial by simultaneous (Aberth-Ehrlich) iteration.

    Success is decided by the scaled residual only. The first attempt starts
    from `hint` when given; then `options.restarts` fresh circles with random
    phase jitter are tried.
    """

    coeffs = np.asarray(coeffs, dtype=complex)
    d = coeffs.size - 1
    if d == 1:
        return np.array([-coeffs[0]], dtype=complex)
    dcoeffs = P.polyder(coeffs)
    rng = np.random.default_rng(seed)
    tol = options.residual_tol

    best, best_res = None, np.inf
    for attempt in range(options.restarts + 1):
        if attempt == 0 and hint is not None and len(hint) == d:
            z0 = _separate(np.asarray(hint, dtype=complex), rng)
        else:
            z0 = _initial_guesses(coeffs, rng)
        z, iters = _aberth_iterate(coeffs, dcoeffs, z0, tol, options.max_iter)
        res = _worst_residual(coeffs, z)
        if res <= tol:
            return z
        logger.debug("aberth attempt %d stalled after %d iterations (residual %.3g)", attempt, iters, res)
        if res < best_res:
            best, best_res = z, res

    loc = dict(location or {})
    loc["best_residual"] = best_res
    raise RootSolverError(
        f"root solver did not converge after {options.restarts} restarts", location=loc
    )


def match_to_hint(values: np.ndarray, hint: np.ndarray) -> np.ndarray:
    """Reorder `values` so values[k] is the one assigned to hint[k] (min total distance)."""
    cost = np.abs(np.asarray(hint)[:, None] - np.asarray(values)[None, :])
    _, cols = linear_sum_assignment(cost)
    return np.asarray(values)[cols]


def solve_preimages(
    p: MonicPolynomial,
    w: complex,
    hint: Sequence[complex] | None = None,
    options: PolyOptions = DEFAULT_POLY_OPTIONS,
) -> np.ndarray:
    """The d solutions of p(z) = w; ordered to follow `hint` when one is given."""

    coeffs = np.array(p.coeffs, dtype=complex)
    coeffs[0] -= w
    hint_arr = None
    if hint is not None:
        hint_arr = np.asarray(hint, dtype=complex)
        if hint_arr.shape != (p.degree,) or not np.all(np.isfinite(hint_arr)):
            hint_arr = None
    z = aberth_roots(
        coeffs, options=options, hint=hint_arr, location={"w": complex(w)}
    )
    if hint_arr is not None:
        z = match_to_hint(z, hint_arr)
    return z


BATCH_POLISH_ITER = 8


def solve_preimages_many(
    p: MonicPolynomial,
    w: Sequence[complex],
    options: PolyOptions = DEFAULT_POLY_OPTIONS,
) -> np.ndarray:
    """The solutions of p(z) = w_i for every w_i at once, shape (len(w), d), rows unordered.

    Stacked companion eigenvalues, then a few vectorized Aberth steps; rows
    still above the residual tolerance are re-solved one at a time.
    """
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    d = p.degree
    coeffs = np.asarray(p.coeffs, dtype=complex)
    if d == 1:
        return (w - coeffs[0])[:, None]
    companion = np.diag(np.ones(d - 1, dtype=complex), -1)
    companion[:, -1] = -coeffs[:-1]
    stacked = np.broadcast_to(companion, (w.size, d, d)).copy()
    stacked[:, 0, -1] += w
    z = np.linalg.eigvals(stacked)

    dcoeffs = p.derivative_coeffs
    eye = np.eye(d, dtype=bool)
    for _ in range(BATCH_POLISH_ITER):
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = (P.polyval(z, coeffs) - w[:, None]) / P.polyval(z, dcoeffs)
            diff = z[:, :, None] - z[:, None, :]
            inv = np.where(eye, 0.0, 1.0 / np.where(eye, 1.0, diff))
            step = ratio / (1.0 - ratio * inv.sum(axis=2))
        z = z - np.where(np.isfinite(step), step, 0.0)

    shifted = np.abs(P.polyval(z, coeffs) - w[:, None])
    scale = residual_scale(coeffs, z) + np.abs(w)[:, None]
    with np.errstate(invalid="ignore"):
        bad = ~np.all(shifted <= options.residual_tol * scale, axis=1)
    for i in np.flatnonzero(bad):
        z[i] = solve_preimages(p, w[i], options=options)
    return z


def critical_points(p: MonicPolynomial, options: PolyOptions = DEFAULT_POLY_OPTIONS) -> np.ndarray:
    """The d−1 roots of p′ (with multiplicity); empty for d = 1."""
    if p.degree < 2:
        return np.empty(0, dtype=complex)
    monic_derivative = p.derivative_coeffs / p.degree
    return aberth_roots(monic_derivative, options=options, location={"stage": "critical_points"})


def critical_values(p: MonicPolynomial, options: PolyOptions = DEFAULT_POLY_OPTIONS) -> np.ndarray:
    return evaluate(p, critical_points(p, options))


def cluster_indices(points: Sequence[complex], tol: float = DEFAULT_POLY_OPTIONS.cluster_tol) -> list[list[int]]:
    """Group indices of points lying within `tol` of each other (transitively)."""

    pts = np.asarray(points, dtype=complex)
    if pts.size == 0:
        return []
    if pts.size == 1:
        return [[0]]
    close = squareform(pdist(np.column_stack([pts.real, pts.imag]))) < tol
    n, labels = connected_components(csr_matrix(close), directed=False)
    return [np.flatnonzero(labels == k).tolist() for k in range(n)]


def multiple_root_spread(scale: float, multiplicity: int, floor: float = 1e-4) -> float:
    """Distance over which a computed `multiplicity`-fold root scatters, at least `floor`·scale.

    An m-fold root perturbed by coefficient noise of size eps splits into m
    points about eps^(1/m) apart.
    """
    m = max(int(multiplicity), 1)
    return scale * max(floor, 10.0 * _EPS ** (1.0 / m))


def coincident_groups(points: Sequence[complex], values: Sequence[complex], spread: float,
                      value_tol: float) -> list[list[int]]:
    """Cluster `points` within `spread`, then split each cluster by coincidence of `values`."""
    pts = np.asarray(points, dtype=complex)
    vals = np.asarray(values, dtype=complex)
    groups = []
    for group in cluster_indices(pts, spread):
        for sub in cluster_indices(vals[group], value_tol):
            groups.append([group[k] for k in sub])
    return groups


def multiset_distance(a: Sequence[complex], b: Sequence[complex]) -> float:
    """Largest gap in the optimal one-to-one matching of two equal-size point sets."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        return float("inf")
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(np.max(cost[rows, cols])) if a.size else 0.0
