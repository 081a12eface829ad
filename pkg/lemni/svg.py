"""Static SVG pictures of traced curves (one path per component)."""

from __future__ import annotations

import io
import logging
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

logger = logging.getLogger(__name__)

FIGURE_INCHES = 6.0
PADDING = 0.10
STROKE_FRACTION = 0.005
SPHERE_CLIP = 4.0  # plane-chart window for spherical curves, |z| ≤ this


def _bounding_box(polylines: Sequence[np.ndarray]) -> tuple[float, float, float, float]:
    finite = [z[np.isfinite(z)] for z in polylines]
    pts = np.concatenate(finite) if finite else np.empty(0, dtype=complex)
    if pts.size == 0:
        return -1.0, 1.0, -1.0, 1.0
    x0, x1 = float(pts.real.min()), float(pts.real.max())
    y0, y1 = float(pts.imag.min()), float(pts.imag.max())
    w, h = max(x1 - x0, 1e-9), max(y1 - y0, 1e-9)
    return x0 - PADDING * w, x1 + PADDING * w, y0 - PADDING * h, y1 + PADDING * h


def render_polylines(
    polylines: Sequence[np.ndarray],
    dots: Sequence[complex] = (),
    closed: bool = True,
) -> str:
    """SVG text: each polyline drawn as one path in a group with id `component-k`."""
    polylines = [np.asarray(z, dtype=complex) for z in polylines]
    x0, x1, y0, y1 = _bounding_box(polylines)
    aspect = (y1 - y0) / (x1 - x0)
    width = FIGURE_INCHES if aspect <= 1 else FIGURE_INCHES / aspect
    height = width * aspect
    stroke = STROKE_FRACTION * max(width, height) * 72.0

    with matplotlib.rc_context({"svg.hashsalt": "lemni", "svg.fonttype": "none"}):
        fig = plt.figure(figsize=(width, height))
        try:
            fig.patch.set_visible(False)
            ax = fig.add_axes((0.0, 0.0, 1.0, 1.0))
            ax.set_axis_off()
            ax.set_xlim(x0, x1)
            ax.set_ylim(y0, y1)
            ax.set_aspect("equal")
            for k, z in enumerate(polylines):
                if closed and z.size:
                    z = np.append(z, z[0])
                (line,) = ax.plot(z.real, z.imag, color="black", linewidth=stroke,
                                  solid_joinstyle="round")
                line.set_gid(f"component-{k}")
            if len(dots):
                d = np.asarray(dots, dtype=complex)
                (marks,) = ax.plot(d.real, d.imag, linestyle="none", marker="o",
                                   markersize=3 * stroke, color="crimson")
                marks.set_gid("touch-points")
            buf = io.StringIO()
            fig.savefig(buf, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
    logger.debug("rendered %d polylines and %d dots", len(polylines), len(dots))
    return buf.getvalue()


def level_curve_svg(curve) -> str:
    """Picture of a traced `LevelCurve`, touch points as dots."""
    return render_polylines(curve.components, curve.touch_points)


def spherical_curve_svg(curve) -> str:
    """Plane-chart picture of a `SphericalCurve`, clipped to |z| ≤ 4."""
    polylines = []
    for z in curve.plane_points():
        z = z.copy()
        z[np.abs(z) > SPHERE_CLIP] = np.nan
        polylines.append(z)
    dots = []
    for c in curve.junctions:
        if c[2] < 1.0 - 1e-12:
            zc = complex(c[0], c[1]) / (1.0 - c[2])
            if abs(zc) <= SPHERE_CLIP:
                dots.append(zc)
    return render_polylines(polylines, dots)

