"""Per-frame class-label rendering through the pinhole camera.

Flat ground makes rendering row-wise: every image row below the horizon
back-projects to one fixed forward distance, and lateral position is
linear in the column index.  A row is therefore painted by interval:
road between the two border offsets, infrastructure in thin strips just
outside them, actors over their occlusion footprints.

The degraded variant flips a preset-dependent fraction of pixels to a
random other class and punches small speckle holes into the road.
"""

from __future__ import annotations

import math

import numpy as np

from ..camera import CameraModel
from ..geometry import to_vehicle_frame
from ..labeling import (
    BACKGROUND,
    INFRASTRUCTURE,
    N_CLASSES,
    ROAD,
    SKY,
    ClassMembershipMap,
)
from .scenario import Scenario

_INFRA_WIDTH = 0.8  # m strip of barrier/curb outside each border
_MAX_SHADOW = 45.0  # m cap on occlusion shadows of tall actors


def camera_for(scenario: Scenario) -> CameraModel:
    c = scenario.config
    return CameraModel(
        width=c.image_width,
        height=c.image_height,
        fx=c.focal_px,
        fy=c.focal_px,
        cx=(c.image_width - 1) / 2.0,
        cy=(c.image_height - 1) / 2.0,
        cam_height=c.camera_height,
        pitch=c.camera_pitch,
    )


def _row_geometry(camera: CameraModel):
    """Forward ground distance per image row; NaN above the horizon."""
    v = np.arange(camera.height, dtype=np.float64)
    b = (v - camera.cy) / camera.fy
    cp, sp = math.cos(camera.pitch), math.sin(camera.pitch)
    denom = b * cp + sp
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(denom > 1e-9, camera.cam_height / denom, np.nan)
        x = t * (cp - b * sp)
    return x


def _col_of(camera: CameraModel, y_lateral, x_forward):
    """Column index (float) of lateral offset y at forward distance x."""
    return camera.cx - camera.fx * y_lateral / x_forward


def _border_bounds(scenario: Scenario, frame: int, x_rows):
    """Vehicle-frame lateral road bounds per row distance (yR, yL)."""
    state = scenario.truth_state(frame)
    s0, _ = _ego_arc(scenario, frame)
    arc = np.arange(-10.0, 420.0, 0.5) + s0
    left = to_vehicle_frame(scenario.border_at(arc, "left"), state.pose)
    right = to_vehicle_frame(scenario.border_at(arc, "right"), state.pose)
    order_l = np.argsort(left[:, 0])
    order_r = np.argsort(right[:, 0])
    y_left = np.interp(x_rows, left[order_l, 0], left[order_l, 1])
    y_right = np.interp(x_rows, right[order_r, 0], right[order_r, 1])
    return y_right, y_left


def _ego_arc(scenario: Scenario, frame: int):
    state = scenario.truth_state(frame)
    diff = scenario.road_xy - state.pose.position
    idx = int(np.argmin(np.einsum("nk,nk->n", diff, diff)))
    return float(scenario.road_s[idx]), idx


def _paint_span(row: np.ndarray, camera: CameraModel, x: float,
                y_lo: float, y_hi: float, value: int):
    """Label columns whose lateral offset lies in [y_lo, y_hi]."""
    c_hi = _col_of(camera, y_lo, x)  # lateral right -> larger column
    c_lo = _col_of(camera, y_hi, x)
    lo = max(int(math.ceil(c_lo - 0.5)), 0)
    hi = min(int(math.floor(c_hi + 0.5)), len(row) - 1)
    if hi >= lo:
        row[lo : hi + 1] = value


def render_truth(scenario: Scenario, frame: int,
                 camera: CameraModel = None) -> ClassMembershipMap:
    if camera is None:
        camera = camera_for(scenario)
    x_rows = _row_geometry(camera)
    labels = np.full((camera.height, camera.width), BACKGROUND, dtype=np.uint8)
    labels[np.isnan(x_rows)] = SKY

    ground_rows = np.flatnonzero(~np.isnan(x_rows) & (x_rows > 0.0))
    y_right, y_left = _border_bounds(scenario, frame, x_rows)
    hw = scenario.config.half_width
    for v in ground_rows:
        x = float(x_rows[v])
        if x > 400.0:
            continue
        yr, yl = float(y_right[v]), float(y_left[v])
        _paint_span(labels[v], camera, x, yl, yl + _INFRA_WIDTH, INFRASTRUCTURE)
        _paint_span(labels[v], camera, x, yr - _INFRA_WIDTH, yr, INFRASTRUCTURE)
        _paint_span(labels[v], camera, x, yr, yl, ROAD)

    # actors paint over everything on their occlusion footprint
    state = scenario.truth_state(frame)
    for s_v, d_v, length, width, height, cls in scenario.vehicles:
        corners = scenario.offset_point(
            np.array([s_v, s_v + length]), np.array([d_v, d_v])
        )
        local = to_vehicle_frame(corners, state.pose)
        x_near = float(np.min(local[:, 0]))
        if x_near < 1.0:
            continue
        y_c = float(np.mean(local[:, 1]))
        if height < camera.cam_height - 1e-6:
            x_far = x_near * camera.cam_height / (camera.cam_height - height)
        else:
            x_far = x_near + _MAX_SHADOW
        x_far = min(x_far, x_near + _MAX_SHADOW)
        for v in ground_rows:
            x = float(x_rows[v])
            if x_near <= x <= x_far:
                _paint_span(labels[v], camera, x, y_c - 0.5 * width,
                            y_c + 0.5 * width, int(cls))
    return ClassMembershipMap(labels)


def degrade(truth: ClassMembershipMap, scenario: Scenario,
            frame: int) -> ClassMembershipMap:
    """Class-flip noise plus speckle holes in the road region."""
    cfg = scenario.config
    rng = np.random.default_rng(
        np.random.SeedSequence((cfg.seed, 1, frame))
    )
    labels = truth.labels.copy()
    flip = rng.random(labels.shape) < cfg.label_flip_rate
    # shift by 1..N_CLASSES-1 guarantees a different class
    bump = rng.integers(1, N_CLASSES, size=labels.shape, dtype=np.uint8)
    labels[flip] = (labels[flip] + bump[flip]) % N_CLASSES
    road_rows, road_cols = np.nonzero(truth.labels == ROAD)
    if len(road_rows):
        h, w = labels.shape
        yy, xx = np.mgrid[0:h, 0:w]
        for _ in range(cfg.speckle_count):
            k = rng.integers(0, len(road_rows))
            r = rng.integers(1, 4)
            hole = (yy - road_rows[k]) ** 2 + (xx - road_cols[k]) ** 2 <= r * r
            labels[hole] = BACKGROUND
    return ClassMembershipMap(labels)


def render_labels(scenario: Scenario, frame: int, camera: CameraModel = None):
    """(truth, degraded) label maps for one frame."""
    truth = render_truth(scenario, frame, camera)
    return truth, degrade(truth, scenario, frame)
