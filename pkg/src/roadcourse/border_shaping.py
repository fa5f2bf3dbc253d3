"""Temporal aggregation of border observations into an optical map.

Ground-plane border points are binned by forward distance and tracked
over a sliding window of frames. Bin medians become shape points once
the bin is reliable (enough samples, small spread); a side that lacks
reliable bins borrows shape points from the other side shifted by the
road width. Splines through the shape points form the optical map.

Robust statistics use Tukey hinges: quartiles are medians of the lower
and upper halves, both halves including the middle element when the
sample count is odd.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .geometry import HermiteSpline, Pose2
from .road_detection import BorderObservation

SRC_NONE = 0
SRC_MEASURED = 1
SRC_EXTRAPOLATED = 2
SRC_NAMES = ("none", "measured", "extrapolated")

_DENSE_STEP = 0.25


def tukey_hinges(values: np.ndarray) -> Tuple[float, float, float]:
    """(median, q1, q3) with quartiles as medians of the two halves."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    n = v.size
    if n == 0:
        return np.nan, np.nan, np.nan
    half = (n + 1) // 2
    return (
        float(np.median(v)),
        float(np.median(v[:half])),
        float(np.median(v[n - half:])),
    )


@dataclass(frozen=True)
class BinStats:
    s_lo: float
    s_hi: float
    count: int
    median: float
    iqr: float
    reliable: bool


class _SideTrack:
    """Per-side sample history: one (x, y) array per frame, ego-relative."""

    def __init__(self, history: int):
        self.frames = deque(maxlen=history)

    def advance(self, increment: Pose2, max_range: float):
        """Re-express stored points in the pose after ``increment``."""
        inv = increment.inverse()
        c, s = np.cos(inv.heading), np.sin(inv.heading)
        shifted = deque(maxlen=self.frames.maxlen)
        for pts in self.frames:
            x = inv.x + c * pts[:, 0] - s * pts[:, 1]
            y = inv.y + s * pts[:, 0] + c * pts[:, 1]
            keep = (x >= 0.0) & (x < max_range)
            shifted.append(np.stack([x[keep], y[keep]], axis=1))
        self.frames = shifted

    def insert(self, points: np.ndarray, max_range: float):
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        keep = (pts[:, 0] >= 0.0) & (pts[:, 0] < max_range)
        self.frames.append(pts[keep])

    def samples(self) -> np.ndarray:
        if not self.frames:
            return np.empty((0, 2))
        return np.concatenate(list(self.frames), axis=0)


@dataclass(frozen=True)
class OpticalMap:
    """Tracked border shape points and the splines through them.

    ``bin_s`` holds bin centers; per-side arrays give the shape-point
    lateral position (nan where absent), its provenance code, and the
    bin reliability flag. Dense tables back the continuous queries.
    """

    valid: bool
    bin_s: np.ndarray
    left_y: np.ndarray
    left_src: np.ndarray
    right_y: np.ndarray
    right_src: np.ndarray
    left_reliable: np.ndarray
    right_reliable: np.ndarray
    dense_x: np.ndarray
    dense_left: np.ndarray
    dense_left_src: np.ndarray
    dense_right: np.ndarray
    dense_right_src: np.ndarray

    def sample(self, x, side: str):
        """(y, src code) of a border at forward distance x; nan/0 if absent."""
        y_tab = self.dense_left if side == "left" else self.dense_right
        src_tab = self.dense_left_src if side == "left" else self.dense_right_src
        x = np.asarray(x, dtype=np.float64)
        idx = np.rint(x / _DENSE_STEP).astype(int)
        inside = (idx >= 0) & (idx < y_tab.size)
        idx = np.clip(idx, 0, max(y_tab.size - 1, 0))
        if y_tab.size == 0:
            y = np.full(x.shape, np.nan)
            src = np.zeros(x.shape, dtype=np.int8)
        else:
            y = np.where(inside, y_tab[idx], np.nan)
            src = np.where(inside, src_tab[idx], SRC_NONE).astype(np.int8)
        if x.ndim == 0:
            return float(y), int(src)
        return y, src

    def center_at(self, x):
        ly, ls = self.sample(x, "left")
        ry, rs = self.sample(x, "right")
        return 0.5 * (ly + ry)


class BorderShaper:
    """Sliding-window border tracker producing per-frame optical maps."""

    def __init__(self, history: int = 30, bin_length: float = 2.0,
                 max_range: float = 60.0, min_count: int = 3,
                 iqr_max: float = 0.5):
        self.bin_length = float(bin_length)
        self.max_range = float(max_range)
        self.min_count = int(min_count)
        self.iqr_max = float(iqr_max)
        self.n_bins = int(round(self.max_range / self.bin_length))
        self._tracks = {"left": _SideTrack(history), "right": _SideTrack(history)}

    def accumulate(self, observations: List[BorderObservation],
                   increment: Pose2 = Pose2(0.0, 0.0, 0.0)):
        """Shift history by the ego increment, then insert the new frame.

        Ignored observations and those without a ground point are
        skipped; points outside [0, max range) are dropped.
        """
        for side in ("left", "right"):
            track = self._tracks[side]
            track.advance(increment, self.max_range)
            pts = [o.ground for o in observations
                   if o.side == side and not o.ignored and o.ground is not None]
            track.insert(
                np.array(pts) if pts else np.empty((0, 2)), self.max_range
            )

    def bin_stats(self, side: str) -> List[BinStats]:
        samples = self._tracks[side].samples()
        out = []
        for i in range(self.n_bins):
            lo = i * self.bin_length
            hi = lo + self.bin_length
            y = samples[(samples[:, 0] >= lo) & (samples[:, 0] < hi), 1]
            if y.size == 0:
                out.append(BinStats(lo, hi, 0, np.nan, np.nan, False))
                continue
            median, q1, q3 = tukey_hinges(y)
            iqr = q3 - q1
            reliable = y.size >= self.min_count and iqr <= self.iqr_max
            out.append(BinStats(lo, hi, int(y.size), median, iqr, reliable))
        return out

    def shape(self, road_width: float = 7.0) -> OpticalMap:
        """Fit border splines through reliable bin medians.

        A bin reliable on one side only lends its median, offset by the
        road width, to the other side (tagged extrapolated). The map is
        invalid when fewer than two bins are reliable on either side.
        """
        stats = {s: self.bin_stats(s) for s in ("left", "right")}
        n = self.n_bins
        bin_s = (np.arange(n) + 0.5) * self.bin_length
        y = {s: np.full(n, np.nan) for s in ("left", "right")}
        src = {s: np.zeros(n, dtype=np.int8) for s in ("left", "right")}
        rel = {s: np.array([b.reliable for b in stats[s]]) for s in ("left", "right")}
        for i in range(n):
            for side, other, sign in (("left", "right", 1.0), ("right", "left", -1.0)):
                if rel[side][i]:
                    y[side][i] = stats[side][i].median
                    src[side][i] = SRC_MEASURED
                elif rel[other][i]:
                    y[side][i] = stats[other][i].median + sign * road_width
                    src[side][i] = SRC_EXTRAPOLATED

        valid = int((rel["left"] | rel["right"]).sum()) >= 2
        dense = {}
        for side in ("left", "right"):
            if valid:
                dense[side] = _dense_side(
                    bin_s, y[side], src[side], self.max_range, self.bin_length
                )
            else:
                dense[side] = (np.empty(0), np.empty(0, dtype=np.int8))
        dense_x = (
            np.arange(0.0, self.max_range + _DENSE_STEP / 2, _DENSE_STEP)
            if valid else np.empty(0)
        )
        return OpticalMap(
            valid=valid, bin_s=bin_s,
            left_y=y["left"], left_src=src["left"],
            right_y=y["right"], right_src=src["right"],
            left_reliable=rel["left"], right_reliable=rel["right"],
            dense_x=dense_x,
            dense_left=dense["left"][0], dense_left_src=dense["left"][1],
            dense_right=dense["right"][0], dense_right_src=dense["right"][1],
        )


def _dense_side(bin_s, y, src, max_range, bin_length):
    """Spline through one side's shape points, sampled on the fixed grid.

    The curve covers the populated bins fully: it is extended linearly
    by half a bin beyond the first and last shape point.
    """
    have = np.flatnonzero(src != SRC_NONE)
    grid = np.arange(0.0, max_range + _DENSE_STEP / 2, _DENSE_STEP)
    dense_y = np.full(grid.size, np.nan)
    dense_src = np.zeros(grid.size, dtype=np.int8)
    if have.size < 2:
        return dense_y, dense_src
    knots = np.stack([bin_s[have], y[have]], axis=1)
    spline = HermiteSpline.through(knots)
    u = np.linspace(0.0, float(have.size - 1), have.size * 16 + 1)
    pts = spline.evaluate(u)
    order = np.argsort(pts[:, 0])
    xk, yk = pts[order, 0], pts[order, 1]
    lo = bin_s[have[0]] - bin_length / 2.0
    hi = bin_s[have[-1]] + bin_length / 2.0
    span = (grid >= lo) & (grid <= hi)
    dense_y[span] = np.interp(grid[span], xk, yk)
    head = span & (grid < xk[0])
    dense_y[head] = yk[0] + (grid[head] - xk[0]) * (
        (yk[1] - yk[0]) / max(xk[1] - xk[0], 1e-9)
    )
    tail = span & (grid > xk[-1])
    dense_y[tail] = yk[-1] + (grid[tail] - xk[-1]) * (
        (yk[-1] - yk[-2]) / max(xk[-1] - xk[-2], 1e-9)
    )
    # provenance of a dense sample follows its nearest shape point
    nearest = have[
        np.argmin(np.abs(grid[span, None] - bin_s[have][None, :]), axis=1)
    ]
    dense_src[span] = src[nearest]
    return dense_y, dense_src


def write_optical_map(optical: OpticalMap, path):
    """Per-bin CSV snapshot of the optical map."""
    with open(path, "w", newline="") as fh:
        fh.write("s_m,left_y_m,left_src,right_y_m,right_src,"
                 "reliable_left,reliable_right\n")
        for i in range(optical.bin_s.size):
            fh.write(
                "%.6f,%.6f,%s,%.6f,%s,%d,%d\n" % (
                    optical.bin_s[i],
                    optical.left_y[i], SRC_NAMES[optical.left_src[i]],
                    optical.right_y[i], SRC_NAMES[optical.right_src[i]],
                    int(optical.left_reliable[i]),
                    int(optical.right_reliable[i]),
                )
            )
