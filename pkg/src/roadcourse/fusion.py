"""Distance-weighted blend of the optical map and the digital map.

Close to the vehicle the camera-derived optical map is trusted fully,
far ahead the digital map takes over, with a linear handover between
``d0`` and ``d1``. When the optical map is invalid the fused course
degrades to the digital course, sample for sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .border_shaping import OpticalMap, SRC_EXTRAPOLATED, SRC_MEASURED
from .digital_map import DigitalMap
from .map_matching import MatchResult

MODE_FUSED = "fused"
MODE_DIGITAL_ONLY = "digital-only"


@dataclass(frozen=True)
class FusionWeights:
    """Piecewise-linear optical trust: 1 below d0, 0 beyond d1."""

    d0: float = 10.0
    d1: float = 40.0

    def __post_init__(self):
        if not self.d0 < self.d1:
            raise ValueError("d0 must be < d1")

    def __call__(self, d):
        d = np.asarray(d, dtype=np.float64)
        w = (self.d1 - d) / (self.d1 - self.d0)
        return np.clip(w, 0.0, 1.0)


@dataclass(frozen=True)
class FusedRoadCourse:
    """Lateral border positions over forward distance, plus blend weight."""

    d: np.ndarray
    left_y: np.ndarray
    right_y: np.ndarray
    w: np.ndarray
    mode: str

    def center(self) -> np.ndarray:
        return 0.5 * (self.left_y + self.right_y)


def digital_course(dmap: DigitalMap, match: MatchResult,
                   distances: np.ndarray):
    """Digital-map borders in the vehicle frame of the matched pose.

    Borders are sampled along arc length ahead of the match, rigidly
    transformed into the vehicle frame, and read out as lateral position
    per forward distance.
    """
    distances = np.asarray(distances, dtype=np.float64)
    pose = dmap.frenet_pose(match.s_hat, match.d_hat, match.psi_hat)
    span = float(distances.max()) if distances.size else 0.0
    arc = match.s_hat + np.arange(-5.0, 2.0 * span + 10.0, 0.5)
    arc = np.clip(arc, 0.0, dmap.length)
    c, s = np.cos(-pose.heading), np.sin(-pose.heading)
    out = {}
    for side in ("left", "right"):
        pts = dmap.border_at(arc, side) - pose.position
        xv = pts[:, 0] * c - pts[:, 1] * s
        yv = pts[:, 0] * s + pts[:, 1] * c
        order = np.argsort(xv)
        out[side] = np.interp(distances, xv[order], yv[order])
    return out["left"], out["right"]


def fuse(optical: OpticalMap, dmap: DigitalMap, match: MatchResult,
         weights: FusionWeights, step: float = 1.0, max_distance: float = 60.0,
         extrapolated_weight: float = 0.5) -> FusedRoadCourse:
    """Blend per sampled distance: w·optical + (1-w)·digital.

    Per side and sample the ramp weight is discounted for extrapolated
    optical points and zeroed where the optical side has no value; an
    invalid optical map yields the digital course unchanged in
    digital-only mode.
    """
    d = np.arange(0.0, max_distance + step / 2.0, step)
    dig_left, dig_right = digital_course(dmap, match, d)
    ramp = weights(d)
    if not optical.valid:
        return FusedRoadCourse(
            d=d, left_y=dig_left, right_y=dig_right,
            w=np.zeros_like(d), mode=MODE_DIGITAL_ONLY,
        )
    fused = {}
    for side, dig in (("left", dig_left), ("right", dig_right)):
        opt_y, opt_src = optical.sample(d, side)
        w_eff = ramp.copy()
        w_eff[opt_src == SRC_EXTRAPOLATED] *= extrapolated_weight
        w_eff[(opt_src != SRC_MEASURED) & (opt_src != SRC_EXTRAPOLATED)] = 0.0
        w_eff[~np.isfinite(opt_y)] = 0.0
        opt_y = np.where(np.isfinite(opt_y), opt_y, 0.0)
        fused[side] = w_eff * opt_y + (1.0 - w_eff) * dig
    return FusedRoadCourse(
        d=d, left_y=fused["left"], right_y=fused["right"],
        w=ramp, mode=MODE_FUSED,
    )


def write_fused_course(course: FusedRoadCourse, path):
    with open(path, "w", newline="") as fh:
        fh.write("d_m,left_y_m,right_y_m,w\n")
        for i in range(course.d.size):
            fh.write("%.6f,%.6f,%.6f,%.6f\n" % (
                course.d[i], course.left_y[i], course.right_y[i], course.w[i],
            ))
