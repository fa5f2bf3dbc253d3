"""Synthetic radar, wheel odometry, and GPS emission.

Each sensor stream draws from its own seed stream derived from
(scenario seed, stream id, frame), so streams are independent and a
regenerated scenario reproduces byte-identical measurements.
"""

from __future__ import annotations

import math

import numpy as np

from ..geometry import to_vehicle_frame
from .scenario import Scenario

_RADAR_STREAM = 2
_ODOM_STREAM = 3
_GPS_STREAM = 4


def emit_radar(scenario: Scenario, frame: int) -> np.ndarray:
    """(N, 3) rows of (range_m, azimuth_rad, relvel_mps).

    Reflections sample both road borders inside the field of view and
    range; most are static (relative velocity cancels the projected ego
    speed up to noise), a configured fraction gets an extra velocity to
    emulate moving road users and must be gated out downstream.
    """
    cfg = scenario.config
    rng = np.random.default_rng(
        np.random.SeedSequence((cfg.seed, _RADAR_STREAM, frame))
    )
    state = scenario.truth_state(frame)
    diff = scenario.road_xy - state.pose.position
    s0 = float(scenario.road_s[int(np.argmin(np.einsum("nk,nk->n", diff, diff)))])
    n = cfg.reflections_per_frame
    arcs = s0 + rng.uniform(-cfg.radar_range, cfg.radar_range, n)
    sides = rng.random(n) < 0.5
    pts = np.where(
        sides[:, None],
        scenario.border_at(arcs, "left"),
        scenario.border_at(arcs, "right"),
    )
    local = to_vehicle_frame(pts, state.pose)
    rng_true = np.hypot(local[:, 0], local[:, 1])
    az_true = np.arctan2(local[:, 1], local[:, 0])
    visible = (rng_true <= cfg.radar_range) & (np.abs(az_true) <= cfg.radar_fov)
    rng_true, az_true = rng_true[visible], az_true[visible]
    m = len(rng_true)
    ranges = rng_true + cfg.radar_range_std * rng.standard_normal(m)
    azimuths = az_true + cfg.radar_az_std * rng.standard_normal(m)
    relvel = -state.v * np.cos(az_true) + cfg.relvel_std * rng.standard_normal(m)
    moving = rng.random(m) < cfg.moving_fraction
    relvel = relvel + moving * rng.uniform(2.0, 8.0, m) * np.where(
        rng.random(m) < 0.5, 1.0, -1.0
    )
    return np.stack([ranges, azimuths, relvel], axis=1)


def emit_odometry(scenario: Scenario, frame: int):
    """((fl, fr, rl, rr) wheel speeds m/s, yaw rate rad/s), noisy."""
    cfg = scenario.config
    rng = np.random.default_rng(
        np.random.SeedSequence((cfg.seed, _ODOM_STREAM, frame))
    )
    state = scenario.truth_state(frame)
    half_track = 0.5 * cfg.wheel_track
    left = state.v - state.omega * half_track
    right = state.v + state.omega * half_track
    wheels = np.array([left, right, left, right])
    wheels = wheels + cfg.odom_speed_std * rng.standard_normal(4)
    yaw = state.omega + cfg.odom_yaw_std * rng.standard_normal()
    return wheels, float(yaw)


def emit_gps(scenario: Scenario, frame: int) -> np.ndarray:
    """World position estimate: truth + constant bias + white jitter."""
    cfg = scenario.config
    rng = np.random.default_rng(
        np.random.SeedSequence((cfg.seed, _GPS_STREAM, frame))
    )
    state = scenario.truth_state(frame)
    jitter = cfg.gps_jitter * rng.standard_normal(2)
    return state.pose.position + scenario.gps_bias + jitter
