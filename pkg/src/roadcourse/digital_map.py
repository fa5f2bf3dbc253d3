"""Local digital road model built from map-database shape points.

The model is a windowed center spline with offset border curves and lane
metadata.  Exact offset curves of cubics are not polynomial, so borders
are realized by sampling the center line at 1 m, offsetting along the
normals by half the road width, and re-splining the result.

Besides the splines, the map precomputes a dense arc-length-indexed
lookup (positions, headings, normals, curvature, half width) so that
Frenet conversions and border predictions are cheap vectorized
interpolations; the particle filter leans on this heavily.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import MapUnavailableError
from .geometry import (
    HermiteSpline,
    LaneMeta,
    Pose2,
    ShapePoint,
    build_spline,
    normalize_angle,
)

DEFAULT_META = LaneMeta(lane_count=2, lane_width=3.5)

_DENSE_STEP = 0.5  # m between dense lookup samples


@dataclass(frozen=True)
class DigitalMap:
    """Immutable local road model over the arc window [0, length].

    Attributes:
        center: spline through the windowed shape points.
        left: re-splined border curve at +half width along the normal.
        right: re-splined border curve at -half width.
        length: arc length of the center spline (validity window end).
        meta_missing: True where metadata was defaulted, per shape point.
    """

    center: HermiteSpline
    left: HermiteSpline
    right: HermiteSpline
    length: float
    point_s: np.ndarray
    point_meta: tuple
    meta_missing: tuple
    dense_s: np.ndarray
    dense_xy: np.ndarray
    dense_heading: np.ndarray
    dense_normal: np.ndarray
    dense_curvature: np.ndarray
    dense_half_width: np.ndarray

    # -- dense lookups (all accept scalars or arrays of s, clamped) ----

    def eval_center(self, s):
        s = np.clip(s, 0.0, self.length)
        x = np.interp(s, self.dense_s, self.dense_xy[:, 0])
        y = np.interp(s, self.dense_s, self.dense_xy[:, 1])
        return np.stack([x, y], axis=-1)

    def heading_at(self, s):
        s = np.clip(s, 0.0, self.length)
        # dense_heading is stored unwrapped so interpolation never
        # crosses the angle seam
        return normalize_angle(np.interp(s, self.dense_s, self.dense_heading))

    def normal_at(self, s):
        h = self.heading_at(s)
        return np.stack([-np.sin(h), np.cos(h)], axis=-1)

    def curvature_at(self, s):
        s = np.clip(s, 0.0, self.length)
        return np.interp(s, self.dense_s, self.dense_curvature)

    def half_width_at(self, s):
        s = np.clip(s, 0.0, self.length)
        return np.interp(s, self.dense_s, self.dense_half_width)

    def meta_at(self, s) -> LaneMeta:
        idx = int(np.argmin(np.abs(self.point_s - float(s))))
        return self.point_meta[idx]

    def meta_missing_at(self, s) -> bool:
        idx = int(np.argmin(np.abs(self.point_s - float(s))))
        return self.meta_missing[idx]

    def border_at(self, s, side: str):
        """Border point(s) at center arc length s; side 'left' or 'right'."""
        sign = {"left": 1.0, "right": -1.0}[side]
        return self.eval_center(s) + sign * self.half_width_at(s)[
            ..., None
        ] * self.normal_at(s)

    # -- Frenet conversions --------------------------------------------

    def frenet_to_world(self, s, d):
        return self.eval_center(s) + np.asarray(d)[..., None] * self.normal_at(s)

    def frenet_pose(self, s: float, d: float, psi: float) -> Pose2:
        p = self.frenet_to_world(s, d)
        return Pose2(p[0], p[1], normalize_angle(self.heading_at(s) + psi))

    def world_to_frenet(self, points):
        """Project world points onto the center line -> (s, d) arrays.

        Nearest dense sample, refined by projecting onto the adjacent
        chord; d is positive to the left of the travel direction.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        diff = pts[:, None, :] - self.dense_xy[None, :, :]
        idx = np.argmin(np.einsum("nmk,nmk->nm", diff, diff), axis=1)
        # chord from the nearest sample toward the neighbor on the query side
        nxt = np.clip(idx + 1, 0, len(self.dense_s) - 1)
        prv = np.clip(idx - 1, 0, len(self.dense_s) - 1)
        fwd = self.dense_xy[nxt] - self.dense_xy[idx]
        rel = pts - self.dense_xy[idx]
        use_prev = np.einsum("nk,nk->n", rel, fwd) < 0.0
        base = np.where(use_prev, prv, idx)
        seg = self.dense_xy[np.where(use_prev, idx, nxt)] - self.dense_xy[base]
        seg_len2 = np.maximum(np.einsum("nk,nk->n", seg, seg), 1e-12)
        rel = pts - self.dense_xy[base]
        t = np.clip(np.einsum("nk,nk->n", rel, seg) / seg_len2, 0.0, 1.0)
        foot = self.dense_xy[base] + t[:, None] * seg
        s = self.dense_s[base] + t * np.sqrt(seg_len2)
        n = self.normal_at(s)
        d = np.einsum("nk,nk->n", pts - foot, n)
        if np.asarray(points).ndim == 1:
            return float(s[0]), float(d[0])
        return s, d


def _resolve_meta(points: Sequence[ShapePoint]):
    metas, missing = [], []
    for p in points:
        if p.meta is None:
            metas.append(DEFAULT_META)
            missing.append(True)
        else:
            metas.append(p.meta)
            missing.append(False)
    return tuple(metas), tuple(missing)


def build_local_map(
    points: Sequence[ShapePoint],
    around: Pose2,
    window: float = 150.0,
) -> DigitalMap:
    """Build the road model from shape points near ``around``.

    Points within Euclidean distance ``window`` of the pose are kept
    (padded to a contiguous index run, since shape points are ordered
    along the road).  Fewer than 2 usable points raises
    :class:`MapUnavailableError`.
    """
    if len(points) < 2:
        raise MapUnavailableError("need at least 2 shape points")
    xy = np.array([p.position for p in points], dtype=np.float64)
    dist = np.hypot(xy[:, 0] - around.x, xy[:, 1] - around.y)
    inside = np.flatnonzero(dist <= window)
    if inside.size == 0 or np.min(dist) > window:
        raise MapUnavailableError(
            f"no shape points within {window:.0f} m of ({around.x:.1f}, {around.y:.1f})"
        )
    lo, hi = int(inside[0]), int(inside[-1]) + 1
    if hi - lo < 2:  # widen a 1-point window to the nearest neighbor
        lo, hi = max(0, lo - 1), min(len(points), hi + 1)
    if hi - lo < 2:
        raise MapUnavailableError("fewer than 2 shape points in window")
    selected = list(points[lo:hi])
    center = build_spline(selected)
    metas, missing = _resolve_meta(selected)

    # dense lookup along the center line
    u_tab, s_tab = center._arc_table()
    length = float(s_tab[-1])
    n_dense = max(int(np.ceil(length / _DENSE_STEP)) + 1, 2)
    dense_s = np.linspace(0.0, length, n_dense)
    dense_u = np.interp(dense_s, s_tab, u_tab)
    dense_xy = center.evaluate(dense_u)
    dense_heading = np.unwrap(center.heading(dense_u))
    dense_curvature = center.curvature(dense_u)
    point_s = np.interp(np.arange(len(selected), dtype=float), u_tab, s_tab)
    nearest = np.argmin(
        np.abs(dense_s[:, None] - point_s[None, :]), axis=1
    )
    dense_half_width = np.array(
        [0.5 * metas[i].road_width for i in nearest]
    )
    normals = np.stack(
        [-np.sin(dense_heading), np.cos(dense_heading)], axis=-1
    )

    # borders: offset the 1 m resampled center line and re-spline
    step = max(int(round(1.0 / _DENSE_STEP)), 1)
    take = np.arange(0, n_dense, step)
    if take[-1] != n_dense - 1:
        take = np.append(take, n_dense - 1)
    if len(take) < 2:
        take = np.array([0, n_dense - 1])
    base_xy = dense_xy[take]
    base_n = normals[take]
    base_hw = dense_half_width[take][:, None]
    left = HermiteSpline.through(base_xy + base_hw * base_n)
    right = HermiteSpline.through(base_xy - base_hw * base_n)

    return DigitalMap(
        center=center,
        left=left,
        right=right,
        length=length,
        point_s=point_s,
        point_meta=metas,
        meta_missing=missing,
        dense_s=dense_s,
        dense_xy=dense_xy,
        dense_heading=dense_heading,
        dense_normal=normals,
        dense_curvature=dense_curvature,
        dense_half_width=dense_half_width,
    )
