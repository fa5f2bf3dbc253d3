"""Planar geometry: poses, frame transforms, cubic Hermite splines.

All coordinates live in a local planar metric frame (UTM-like, x east,
y north, meters). Vehicle frames have x forward and y to the left.
Angles are radians normalized into (-pi, pi].
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DataError, InvalidInputError

_TWO_PI = 2.0 * math.pi


def normalize_angle(a):
    """Wrap an angle (scalar or array) into (-pi, pi]."""
    a = np.asarray(a, dtype=float)
    w = np.mod(a + math.pi, _TWO_PI) - math.pi  # lands in [-pi, pi)
    w = np.where(w <= -math.pi, w + _TWO_PI, w)
    return float(w) if w.ndim == 0 else w


@dataclass(frozen=True)
class Pose2:
    """Pose in the plane: position in meters, heading in (-pi, pi]."""

    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "heading", normalize_angle(self.heading))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def compose(self, delta: "Pose2") -> "Pose2":
        """Apply a pose increment expressed in this pose's frame."""
        c, s = math.cos(self.heading), math.sin(self.heading)
        return Pose2(
            self.x + c * delta.x - s * delta.y,
            self.y + s * delta.x + c * delta.y,
            self.heading + delta.heading,
        )

    def inverse(self) -> "Pose2":
        c, s = math.cos(self.heading), math.sin(self.heading)
        return Pose2(-(c * self.x + s * self.y), s * self.x - c * self.y, -self.heading)

    def relative_to(self, reference: "Pose2") -> "Pose2":
        """Increment d with reference.compose(d) == self."""
        return reference.inverse().compose(self)


def to_vehicle_frame(points, ego: Pose2):
    """World points (..., 2) into the frame of ``ego``."""
    p = np.asarray(points, dtype=float)
    c, s = math.cos(ego.heading), math.sin(ego.heading)
    dx = p[..., 0] - ego.x
    dy = p[..., 1] - ego.y
    return np.stack([c * dx + s * dy, -s * dx + c * dy], axis=-1)


def to_world_frame(points, ego: Pose2):
    """Inverse of :func:`to_vehicle_frame`."""
    p = np.asarray(points, dtype=float)
    c, s = math.cos(ego.heading), math.sin(ego.heading)
    return np.stack(
        [ego.x + c * p[..., 0] - s * p[..., 1], ego.y + s * p[..., 0] + c * p[..., 1]],
        axis=-1,
    )


@dataclass(frozen=True)
class LaneMeta:
    lane_count: int
    lane_width: float

    def __post_init__(self):
        if self.lane_count < 1:
            raise InvalidInputError("lane_count must be >= 1")
        if not self.lane_width > 0.0:
            raise InvalidInputError("lane_width must be > 0")

    @property
    def road_width(self) -> float:
        return self.lane_count * self.lane_width


@dataclass(frozen=True)
class ShapePoint:
    """Surveyed road point with optional lane metadata."""

    position: np.ndarray
    meta: Optional[LaneMeta] = None

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))


# Gauss-Legendre nodes/weights reused by the arc-length quadrature.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


class HermiteSpline:
    """Cubic Hermite interpolant through ordered 2D control points.

    The curve is parameterized per segment: parameter u runs over
    [0, n-1] and hits control point i exactly at u = i. Tangents follow
    the Catmull-Rom rule (p[i+1] - p[i-1]) / 2, with one-sided
    differences at both ends.
    """

    def __init__(self, points, tangents):
        points = np.asarray(points, dtype=float)
        tangents = np.asarray(tangents, dtype=float)
        if points.ndim != 2 or points.shape[1] != 2 or len(points) < 2:
            raise InvalidInputError("need at least 2 control points of shape (n, 2)")
        if tangents.shape != points.shape:
            raise InvalidInputError("one tangent per control point required")
        self.points = points
        self.tangents = tangents
        self._table = None  # lazily built (u, s) arc-length table

    @classmethod
    def through(cls, points) -> "HermiteSpline":
        """Catmull-Rom construction through the given points."""
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != 2 or len(points) < 2:
            raise InvalidInputError("need at least 2 control points of shape (n, 2)")
        if np.any(np.all(points[1:] == points[:-1], axis=1)):
            raise InvalidInputError("duplicate consecutive control points")
        tan = np.empty_like(points)
        if len(points) > 2:
            tan[1:-1] = (points[2:] - points[:-2]) / 2.0
        tan[0] = points[1] - points[0]
        tan[-1] = points[-1] - points[-2]
        return cls(points, tan)

    # -- evaluation ----------------------------------------------------

    @property
    def u_max(self) -> float:
        return float(len(self.points) - 1)

    def _split_param(self, u):
        u = np.asarray(u, dtype=float)
        i = np.clip(np.floor(u).astype(int), 0, len(self.points) - 2)
        return i, u - i

    def evaluate(self, u):
        """Curve point(s) at parameter u; clamps to [0, u_max] segments."""
        i, t = self._split_param(u)
        h00 = (2.0 * t - 3.0) * t * t + 1.0
        h10 = ((t - 2.0) * t + 1.0) * t
        h01 = (3.0 - 2.0 * t) * t * t
        h11 = (t - 1.0) * t * t
        return (
            h00[..., None] * self.points[i]
            + h10[..., None] * self.tangents[i]
            + h01[..., None] * self.points[i + 1]
            + h11[..., None] * self.tangents[i + 1]
        )

    def derivative(self, u):
        i, t = self._split_param(u)
        d00 = 6.0 * t * (t - 1.0)
        d10 = (3.0 * t - 4.0) * t + 1.0
        d01 = -d00
        d11 = (3.0 * t - 2.0) * t
        return (
            d00[..., None] * self.points[i]
            + d10[..., None] * self.tangents[i]
            + d01[..., None] * self.points[i + 1]
            + d11[..., None] * self.tangents[i + 1]
        )

    def second_derivative(self, u):
        i, t = self._split_param(u)
        s00 = 12.0 * t - 6.0
        s10 = 6.0 * t - 4.0
        s11 = 6.0 * t - 2.0
        return (
            s00[..., None] * (self.points[i] - self.points[i + 1])
            + s10[..., None] * self.tangents[i]
            + s11[..., None] * self.tangents[i + 1]
        )

    def heading(self, u):
        d = self.derivative(u)
        return np.arctan2(d[..., 1], d[..., 0])

    def curvature(self, u):
        """Signed curvature (parameterization invariant); left turn > 0."""
        d = self.derivative(u)
        dd = self.second_derivative(u)
        num = d[..., 0] * dd[..., 1] - d[..., 1] * dd[..., 0]
        speed = np.hypot(d[..., 0], d[..., 1])
        return num / speed**3

    def normal(self, u):
        """Left unit normal(s) of the curve."""
        d = self.derivative(u)
        n = np.stack([-d[..., 1], d[..., 0]], axis=-1)
        return n / np.linalg.norm(n, axis=-1, keepdims=True)

    # -- arc length ----------------------------------------------------

    def _speed(self, u):
        d = self.derivative(u)
        return np.hypot(d[..., 0], d[..., 1])

    def _gl_segment(self, a: float, b: float) -> float:
        half = 0.5 * (b - a)
        u = 0.5 * (a + b) + half * _GL_X
        return float(half * np.dot(_GL_W, self._speed(u)))

    def _adaptive(self, a: float, b: float, whole: float, tol: float, depth: int) -> float:
        m = 0.5 * (a + b)
        left = self._gl_segment(a, m)
        right = self._gl_segment(m, b)
        if depth >= 24 or abs(left + right - whole) < tol:
            return left + right
        return self._adaptive(a, m, left, 0.5 * tol, depth + 1) + self._adaptive(
            m, b, right, 0.5 * tol, depth + 1
        )

    def arc_length(self, tol: float = 1e-6) -> float:
        """Total curve length by adaptive Gauss-Legendre quadrature."""
        total = 0.0
        for i in range(len(self.points) - 1):
            whole = self._gl_segment(i, i + 1.0)
            total += self._adaptive(i, i + 1.0, whole, tol, 0)
        return total

    def _arc_table(self):
        """Dense (u, cumulative s) table used to invert arc length."""
        if self._table is None:
            k = 48  # subintervals per segment
            n_seg = len(self.points) - 1
            edges = np.linspace(0.0, n_seg, n_seg * k + 1)
            a, b = edges[:-1], edges[1:]
            half = 0.5 * (b - a)
            u = 0.5 * (a + b)[:, None] + half[:, None] * _GL_X[None, :]
            pieces = half * (self._speed(u) @ _GL_W)
            s = np.concatenate([[0.0], np.cumsum(pieces)])
            if np.any(np.diff(s) <= 0.0):
                raise InvalidInputError("degenerate spline: arc length not increasing")
            self._table = (edges, s)
        return self._table

    def param_at_arc(self, s):
        """Parameter u at arc length s (clamped to the curve)."""
        u_tab, s_tab = self._arc_table()
        return np.interp(s, s_tab, u_tab)

    def eval_at_arc(self, s):
        return self.evaluate(self.param_at_arc(s))

    def heading_at_arc(self, s):
        return self.heading(self.param_at_arc(s))


def build_spline(points) -> HermiteSpline:
    """Spline through shape points, (n, 2) arrays, or point sequences."""
    if len(points) and isinstance(points[0], ShapePoint):
        points = np.array([p.position for p in points])
    return HermiteSpline.through(points)


def sample_by_arclength(spline: HermiteSpline, step: float):
    """Samples (s, point, heading) at s = 0, step, 2*step, ...

    The end of the curve is always included as the final sample, so the
    last chord may be shorter than ``step``.
    """
    if not step > 0.0:
        raise InvalidInputError("step must be > 0")
    u_tab, s_tab = spline._arc_table()
    total = float(s_tab[-1])
    if total < 1e-12:
        return []
    s_vals = list(np.arange(0.0, total + 1e-9, step))
    if s_vals[-1] < total - 1e-9:
        s_vals.append(total)
    u_vals = np.interp(s_vals, s_tab, u_tab)
    pts = spline.evaluate(u_vals)
    heads = spline.heading(u_vals)
    return [(float(s), pts[i], float(heads[i])) for i, s in enumerate(s_vals)]


def resample_polyline(points, spacing: float) -> np.ndarray:
    """Even re-sampling of a point sequence along its interpolating spline."""
    spline = build_spline(points)
    return np.array([p for _, p, _ in sample_by_arclength(spline, spacing)])


# -- shape point CSV -------------------------------------------------------

_SHAPE_HEADER = ["id", "x_m", "y_m", "lane_count", "lane_width_m"]


def read_shape_points(path) -> list:
    """Read `id,x_m,y_m,lane_count,lane_width_m` rows; empty meta allowed."""
    points = []
    try:
        with open(path, "r", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != _SHAPE_HEADER:
                raise DataError(f"{path}: expected header {','.join(_SHAPE_HEADER)}")
            for row in reader:
                if not row:
                    continue
                if len(row) != 5:
                    raise DataError(f"{path}: malformed row {row!r}")
                _, x, y, lc, lw = row
                meta = None
                if lc.strip() and lw.strip():
                    meta = LaneMeta(int(lc), float(lw))
                points.append(ShapePoint(np.array([float(x), float(y)]), meta))
    except (ValueError, OSError) as exc:
        raise DataError(f"{path}: {exc}") from exc
    return points


def write_shape_points(path, points: Sequence[ShapePoint]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_SHAPE_HEADER)
        for i, p in enumerate(points):
            lc = p.meta.lane_count if p.meta else ""
            lw = f"{p.meta.lane_width:.3f}" if p.meta else ""
            writer.writerow([i, f"{p.position[0]:.6f}", f"{p.position[1]:.6f}", lc, lw])
