"""Convex hull, perimeter and diameter of planar point sets.

The filled lemniscate {|p| ≤ 1} of a monic polynomial has logarithmic
capacity exactly 1, so when E(p) is connected the perimeter of its convex
hull is at most π(√10 − 3√2 + 4) < 9.173. Capacity itself is never computed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial.distance import pdist

from .error_handling import require

logger = logging.getLogger(__name__)

ALPHA0_BOUND = math.pi * (math.sqrt(10.0) - 3.0 * math.sqrt(2.0) + 4.0)
ORIENTATION_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class Hull:
    vertices: np.ndarray  # counterclockwise extreme points

    @property
    def perimeter(self) -> float:
        v = self.vertices
        if v.size < 2:
            return 0.0
        return float(np.sum(np.abs(np.roll(v, -1) - v)))

    @property
    def diameter(self) -> float:
        v = self.vertices
        if v.size < 2:
            return 0.0
        return float(np.max(pdist(np.column_stack([v.real, v.imag]))))

    def contains(self, points, tol: float = 1e-10) -> np.ndarray:
        """Signed-area test; points on the boundary count as inside."""
        pts = np.atleast_1d(np.asarray(points, dtype=complex))
        v = self.vertices
        scale = tol * (1.0 + float(np.max(np.abs(v))) if v.size else 1.0)
        if v.size == 1:
            return np.abs(pts - v[0]) <= scale
        if v.size == 2:
            a, b = v
            along = np.real((pts - a) * np.conj(b - a)) / abs(b - a) ** 2
            off = np.abs(np.imag((pts - a) * np.conj(b - a))) / abs(b - a)
            return (off <= scale) & (along >= -scale) & (along <= 1 + scale)
        edge = np.roll(v, -1) - v
        rel = pts[:, None] - v[None, :]
        cross = np.imag(np.conj(edge)[None, :] * rel)
        return np.all(cross >= -scale * np.abs(edge)[None, :], axis=1)


def _cross(o: complex, a: complex, b: complex) -> float:
    return (a.real - o.real) * (b.imag - o.imag) - (a.imag - o.imag) * (b.real - o.real)


def _half_hull(points: list[complex]) -> list[complex]:
    chain: list[complex] = []
    for pt in points:
        while len(chain) >= 2:
            o, a = chain[-2], chain[-1]
            scale = ORIENTATION_EPS * (abs(a - o) * abs(pt - o) + 1e-300)
            if _cross(o, a, pt) <= scale:
                chain.pop()
            else:
                break
        chain.append(pt)
    return chain


def convex_hull(points: Sequence[complex]) -> Hull:
    """Monotone-chain hull; collinear input gives a two-vertex hull."""
    pts = np.unique(np.atleast_1d(np.asarray(points, dtype=complex)).ravel())
    require(pts.size >= 1, "convex hull needs at least one point")
    # np.unique sorts complex lexicographically by (real, imag)
    ordered = pts.tolist()
    if len(ordered) <= 2:
        return Hull(np.array(ordered, dtype=complex))
    lower = _half_hull(ordered)
    upper = _half_hull(ordered[::-1])
    vertices = lower[:-1] + upper[:-1]
    return Hull(np.array(vertices, dtype=complex))


@dataclass(frozen=True)
class Lemma3Check:
    holds: bool
    applicable: bool
    hull_perimeter: float
    bound: float = ALPHA0_BOUND


def check_lemma3(curve) -> Lemma3Check:
    """Hull perimeter of a connected traced lemniscate against π(√10 − 3√2 + 4)."""
    perimeter = convex_hull(curve.vertices()).perimeter
    if curve.component_count != 1:
        return Lemma3Check(True, False, perimeter)
    holds = perimeter <= ALPHA0_BOUND + 1e-3
    if not holds:
        logger.warning("hull perimeter %.6f exceeds %.6f on a connected level set", perimeter, ALPHA0_BOUND)
    return Lemma3Check(holds, True, perimeter)


def verify_lemma3(curve) -> bool:
    """True unless the curve is connected and its hull is too long (trivially true otherwise)."""
    return check_lemma3(curve).holds
