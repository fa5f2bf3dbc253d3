"""Synthetic driving-scenario generation.

A scenario is a gently curving rural road (integrated sinusoidal
curvature), a ground-truth trajectory driving the right lane center at
constant speed, parked occluder vehicles near the right border, and the
noise profile that later corrupts labels and sensors.  Five named
presets (A-E) mirror increasingly adverse conditions by raising the
label corruption; A is the cleanest, D the harshest.

Everything derives deterministically from the seed: generating the same
(config, seed) twice yields identical scenarios.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

import numpy as np

from ..errors import GenerationError, InvalidInputError
from ..geometry import LaneMeta, Pose2, ShapePoint

_ROAD_STEP = 0.25  # m between dense road samples

PRESET_ORDER = ("A", "B", "C", "D", "E")

PRESETS = {
    "A": dict(label_flip_rate=0.02, speckle_count=4, n_vehicles=1,
              with_vru=False, weather="regular"),
    "B": dict(label_flip_rate=0.05, speckle_count=8, n_vehicles=1,
              with_vru=False, weather="wet road"),
    "C": dict(label_flip_rate=0.10, speckle_count=12, n_vehicles=2,
              with_vru=False, weather="rain"),
    "D": dict(label_flip_rate=0.25, speckle_count=20, n_vehicles=3,
              with_vru=False, weather="heavy snowfall"),
    "E": dict(label_flip_rate=0.08, speckle_count=10, n_vehicles=2,
              with_vru=True, weather="bad lane markings"),
}


@dataclass(frozen=True)
class ScenarioConfig:
    """Full parameterization of one synthetic scenario."""

    preset: str = "A"
    seed: int = 0
    n_frames: int = 200
    frame_rate: float = 20.0
    speed: float = 15.0
    # road geometry
    lane_count: int = 2
    lane_width: float = 3.5
    ego_lane_offset: float = -1.75
    curvature_amplitude: float = 0.008
    curvature_wavelength: float = 180.0
    start_arc: float = 30.0
    # label corruption
    label_flip_rate: float = 0.02
    speckle_count: int = 4
    # actors
    n_vehicles: int = 1
    with_vru: bool = False
    # map database corruption
    shape_spacing: float = 25.0
    shape_noise: float = 1.0
    # gps
    gps_bias_max: float = 10.0
    gps_jitter: float = 2.0
    # radar
    radar_range: float = 100.0
    radar_fov: float = math.pi / 3.0
    radar_range_std: float = 0.2
    radar_az_std: float = 0.0087
    relvel_std: float = 0.3
    moving_fraction: float = 0.1
    reflections_per_frame: int = 140
    # odometry; the yaw figure is a gyro-grade random walk, wheel-only
    # dead reckoning would drift the grid registration far faster than
    # the occupancy decay forgets old evidence
    odom_speed_std: float = 0.1
    odom_yaw_std: float = 0.004
    wheel_track: float = 1.6
    # camera (written to scenario.cfg so consumers match the renderer)
    image_width: int = 200
    image_height: int = 150
    focal_px: float = 140.0
    camera_height: float = 1.5
    camera_pitch: float = 0.09
    weather: str = "regular"

    def __post_init__(self):
        if self.n_frames < 1:
            raise InvalidInputError("n_frames must be >= 1")
        if not (self.speed >= 0.0 and self.frame_rate > 0.0):
            raise InvalidInputError("need speed >= 0 and frame_rate > 0")
        if not 0.0 <= self.label_flip_rate <= 1.0:
            raise InvalidInputError("label_flip_rate must be in [0, 1]")

    @property
    def dt(self) -> float:
        return 1.0 / self.frame_rate

    @property
    def half_width(self) -> float:
        return 0.5 * self.lane_count * self.lane_width


def preset_config(name: str, seed: int = 0, **overrides) -> ScenarioConfig:
    """Config for preset A-E; extra keyword overrides win."""
    if name not in PRESETS:
        raise InvalidInputError(
            f"unknown preset {name!r}; expected one of {', '.join(PRESET_ORDER)}"
        )
    kw = dict(PRESETS[name])
    kw.update(overrides)
    return ScenarioConfig(preset=name, seed=seed, **kw)


@dataclass(frozen=True)
class GroundTruthState:
    pose: Pose2
    v: float
    omega: float
    t: float

    def __post_init__(self):
        if self.v < 0.0:
            raise InvalidInputError("speed must be >= 0")


class Scenario:
    """Generated world: dense road geometry plus per-frame ground truth.

    Road lookups (center, heading, curvature, borders) interpolate a
    dense arc-length table; the trajectory is integrated so that the ego
    tracks the right lane center at constant body speed.
    """

    def __init__(self, config: ScenarioConfig, road_s, road_xy, road_heading,
                 road_curvature, trajectory, shape_points, vehicles, gps_bias):
        self.config = config
        self.road_s = road_s
        self.road_xy = road_xy
        self.road_heading = road_heading
        self.road_curvature = road_curvature
        self.trajectory = trajectory
        self.shape_points = shape_points
        self.vehicles = vehicles
        self.gps_bias = gps_bias

    # -- road lookups ----------------------------------------------------

    @property
    def length(self) -> float:
        return float(self.road_s[-1])

    def center_at(self, s):
        s = np.clip(s, 0.0, self.length)
        x = np.interp(s, self.road_s, self.road_xy[:, 0])
        y = np.interp(s, self.road_s, self.road_xy[:, 1])
        return np.stack([x, y], axis=-1)

    def heading_at(self, s):
        s = np.clip(s, 0.0, self.length)
        return np.interp(s, self.road_s, self.road_heading)

    def curvature_at(self, s):
        s = np.clip(s, 0.0, self.length)
        return np.interp(s, self.road_s, self.road_curvature)

    def normal_at(self, s):
        h = self.heading_at(s)
        return np.stack([-np.sin(h), np.cos(h)], axis=-1)

    def border_at(self, s, side: str):
        sign = {"left": 1.0, "right": -1.0}[side]
        hw = self.config.half_width
        return self.center_at(s) + sign * hw * self.normal_at(s)

    def offset_point(self, s, d):
        return self.center_at(s) + np.asarray(d)[..., None] * self.normal_at(s)

    # -- trajectory ------------------------------------------------------

    def truth_state(self, frame: int) -> GroundTruthState:
        return self.trajectory[frame]

    @property
    def n_frames(self) -> int:
        return len(self.trajectory)


def _integrate_road(config: ScenarioConfig, total_length: float):
    amp, wav = config.curvature_amplitude, config.curvature_wavelength
    # the heading swing bound covers both harmonics below; reject
    # configs that would wind the road onto itself
    if amp * wav / math.pi * 1.25 >= 1.2:
        raise GenerationError(
            "road would wind onto itself: curvature amplitude x wavelength too large"
        )
    n = int(math.ceil(total_length / _ROAD_STEP)) + 1
    s = np.arange(n) * _ROAD_STEP
    # two spatial scales: rural roads wind at more than one wavelength,
    # and the short scale is what makes longitudinal position observable
    # for map matching (a purely long-wave road is near self-similar
    # under arc shifts of a few meters).  The short wavelength must stay
    # comfortably above twice the map shape-point spacing or the digital
    # map cannot represent it
    base = 2.0 * math.pi * s / wav
    curvature = amp * (np.sin(base) + np.sin(2.0 * base + 1.3))
    # heading by trapezoidal integration of curvature over arc length
    heading = np.concatenate(
        [[0.0], np.cumsum(0.5 * (curvature[1:] + curvature[:-1]) * _ROAD_STEP)]
    )
    x = np.concatenate(
        [[0.0], np.cumsum(0.5 * (np.cos(heading[1:]) + np.cos(heading[:-1])) * _ROAD_STEP)]
    )
    y = np.concatenate(
        [[0.0], np.cumsum(0.5 * (np.sin(heading[1:]) + np.sin(heading[:-1])) * _ROAD_STEP)]
    )
    return s, np.stack([x, y], axis=1), heading, curvature


def generate(config: ScenarioConfig) -> Scenario:
    """Build the deterministic scenario for ``config``."""
    d = config.ego_lane_offset
    kmax = config.curvature_amplitude
    stretch = 1.0 / max(1.0 - abs(d) * kmax, 0.5)
    travel = config.speed * config.n_frames * config.dt * stretch
    total = config.start_arc + travel + config.radar_range + 60.0
    road_s, road_xy, road_heading, road_curvature = _integrate_road(config, total)

    # ego trajectory: constant body speed along the d-offset path; the
    # center-arc rate is v / (1 - d * curvature(s))
    curv = lambda s: np.interp(s, road_s, road_curvature)
    states = []
    s_c = config.start_arc
    n_sub = 4
    h = config.dt / n_sub
    for i in range(config.n_frames):
        t = i * config.dt
        k = float(curv(s_c))
        denom = max(1.0 - d * k, 1e-3)
        heading = float(np.interp(s_c, road_s, road_heading))
        cx = np.interp(s_c, road_s, road_xy[:, 0]) - d * math.sin(heading)
        cy = np.interp(s_c, road_s, road_xy[:, 1]) + d * math.cos(heading)
        omega = config.speed * k / denom
        states.append(
            GroundTruthState(Pose2(float(cx), float(cy), heading),
                             config.speed, float(omega), t)
        )
        for _ in range(n_sub):  # midpoint rule keeps the path on-lane
            k1 = config.speed / max(1.0 - d * float(curv(s_c)), 1e-3)
            s_mid = s_c + 0.5 * h * k1
            k2 = config.speed / max(1.0 - d * float(curv(s_mid)), 1e-3)
            s_c += h * k2

    rng = np.random.default_rng(np.random.SeedSequence((config.seed, 0)))

    # map database: subsampled, jittered shape points with metadata
    meta = LaneMeta(config.lane_count, config.lane_width)
    s_pts = np.arange(0.0, road_s[-1], config.shape_spacing)
    noise = config.shape_noise * rng.standard_normal((len(s_pts), 2))
    centers = np.stack(
        [np.interp(s_pts, road_s, road_xy[:, 0]),
         np.interp(s_pts, road_s, road_xy[:, 1])], axis=1
    )
    shape_points = [
        ShapePoint(centers[i] + noise[i], meta) for i in range(len(s_pts))
    ]

    # parked occluders hugging the right border, spread over the route;
    # rows are (arc s, lateral d, length, width, height, class id)
    from ..labeling import VEHICLE, VRU

    vehicles = []
    if config.n_vehicles > 0:
        lo = config.start_arc + 40.0
        hi = config.start_arc + max(travel, 60.0)
        arcs = np.sort(rng.uniform(lo, hi, config.n_vehicles))
        for s_v in arcs:
            lat = -config.half_width + 0.9 + rng.uniform(-0.2, 0.2)
            vehicles.append((float(s_v), float(lat), 4.5, 1.8, 1.0, VEHICLE))
    if config.with_vru:
        s_v = config.start_arc + 0.6 * max(travel, 60.0)
        vehicles.append(
            (float(s_v), config.half_width - 0.5, 0.6, 0.6, 1.2, VRU)
        )
    vehicles = np.array(vehicles, dtype=np.float64).reshape(-1, 6)

    angle = rng.uniform(0.0, 2.0 * math.pi)
    mag = rng.uniform(0.0, config.gps_bias_max)
    gps_bias = np.array([mag * math.cos(angle), mag * math.sin(angle)])

    return Scenario(config, road_s, road_xy, road_heading, road_curvature,
                    states, shape_points, vehicles, gps_bias)
