"""Frame-loop orchestration, evaluation, and run artifacts.

Per frame the processing order is fixed: ego-motion update, grid
integration and recentering, local digital map, map matching, road
detection, border shaping, fusion. Any stage may degrade (no road
found, optical map invalid, map window exhausted); the run never
aborts. Errors against the ground-truth trajectory are sampled at
1 m look-ahead steps and averaged over frames, then distance.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from . import ego_motion
from .border_shaping import BorderShaper, write_optical_map
from .config import PipelineConfig, save_config
from .digital_map import DigitalMap, build_local_map
from .errors import (
    InvalidInputError,
    MapUnavailableError,
    NoBorderError,
    NoRoadError,
)
from .fusion import (
    MODE_DIGITAL_ONLY,
    MODE_FUSED,
    FusedRoadCourse,
    FusionWeights,
    fuse,
    write_fused_course,
)
from .geometry import Pose2
from .grid_map import GridMap
from .map_matching import MapMatcher, MatchResult
from .road_detection import detect_borders
from .sim import camera_for
from .sim.io import ScenarioDir, frame_dir


@dataclass(frozen=True)
class FrameEstimate:
    """Everything evaluation needs about one processed frame."""

    frame: int
    match: MatchResult
    course: FusedRoadCourse
    optical_valid: bool
    lane_fraction: float


@dataclass(frozen=True)
class EvaluationReport:
    mean_short_range_error: float
    distances: np.ndarray
    error_profile: np.ndarray
    optical_availability: float
    n_frames: int

    def __post_init__(self):
        if not 0.0 <= self.optical_availability <= 1.0:
            raise ValueError("availability must lie in [0, 1]")


@dataclass(frozen=True)
class PipelineResult:
    frames: List[FrameEstimate]
    report: Optional[EvaluationReport]


def _ego_lane_fraction(dmap: DigitalMap, match: MatchResult) -> float:
    """Cross-road position of the matched lane's center, 0=right border."""
    meta = dmap.meta_at(match.s_hat)
    half = 0.5 * meta.road_width
    idx = int(math.floor((match.d_hat + half) / meta.lane_width))
    idx = min(max(idx, 0), meta.lane_count - 1)
    return (idx + 0.5) / meta.lane_count


def run_pipeline(scenario_dir, config: PipelineConfig,
                 use_optical: bool = True,
                 out_dir=None) -> PipelineResult:
    """Process a serialized scenario end to end.

    The camera model is taken from the scenario configuration (the
    renderer's parameters travel with the data). With ``use_optical``
    False the camera path is skipped entirely and every frame fuses in
    digital-only mode.
    """
    sdir = scenario_dir if isinstance(scenario_dir, ScenarioDir) else ScenarioDir(scenario_dir)
    camera = camera_for(sdir)
    dt = sdir.config.dt

    state = ego_motion.initial_state()
    grid = GridMap(
        cell_size=config.grid_cell_size,
        extent=config.grid_extent,
        center=(config.grid_forward_bias, 0.0),
    )
    matcher = MapMatcher(
        n_particles=config.particle_count,
        temperature=config.score_temperature,
        score_range=config.score_range,
        s_noise=config.pf_s_noise,
        d_noise=config.pf_d_noise,
        psi_noise=config.pf_psi_noise,
        seed=config.seed,
    )
    shaper = BorderShaper(
        history=config.bin_history,
        bin_length=config.bin_length,
        max_range=config.max_optical_range,
        min_count=config.bin_min_count,
        iqr_max=config.bin_iqr_max,
    )
    weights = FusionWeights(config.fusion_d0, config.fusion_d1)

    dmap = None
    map_center = None
    prev_pose = state.pose
    frames: List[FrameEstimate] = []

    writer = None
    if out_dir is not None:
        writer = _RunWriter(
            out_dir, config,
            preset=sdir.config.preset,
            mode=MODE_FUSED if use_optical else MODE_DIGITAL_ONLY,
        )

    for k in range(sdir.n_frames):
        data = sdir.frame(k)

        # predict only between frames: frame k's measurements were taken
        # at k * dt, so integrating its radar at a pose propagated past
        # that time would shift all grid content forward by v * dt
        if k > 0:
            state = ego_motion.predict(
                state, dt,
                accel_std=config.ekf_accel_std,
                turn_accel_std=config.ekf_turn_accel_std,
            )
        state = ego_motion.update(
            state, data.wheel_speeds, data.yaw_rate,
            speed_std=config.odom_speed_std,
            yaw_std=config.odom_yaw_std,
        )
        pose = state.pose
        increment = pose.relative_to(prev_pose)
        prev_pose = pose

        grid.integrate(
            data.radar, state,
            alpha=config.grid_alpha, decay=config.grid_decay,
            static_gate=config.static_gate,
        )
        grid.recenter(pose, forward_bias=config.grid_forward_bias)

        if dmap is None:
            dmap = build_local_map(
                sdir.shape_points, Pose2(data.gps[0], data.gps[1], 0.0),
                window=config.map_window,
            )
            map_center = np.asarray(data.gps, dtype=np.float64)
            matcher.initialize(dmap, gps_position=data.gps)
        elif np.linalg.norm(match.pose.position - map_center) > config.map_window / 3.0:
            try:
                dmap = build_local_map(
                    sdir.shape_points, match.pose, window=config.map_window
                )
                map_center = match.pose.position
            except MapUnavailableError:
                pass  # keep the previous window, matching degrades gracefully

        match = matcher.step(grid, dmap, increment, pose)

        if use_optical:
            try:
                observations = detect_borders(
                    data.labels_noisy, camera,
                    min_fraction=config.min_component_fraction,
                    occlusion_radius=config.occlusion_radius,
                )
            except (NoRoadError, NoBorderError):
                observations = []
            shaper.accumulate(observations, increment)
            road_width = 2.0 * dmap.half_width_at(match.s_hat)
            optical = shaper.shape(road_width=road_width)
        else:
            optical = shaper.shape()

        course = fuse(
            optical, dmap, match, weights,
            step=config.fusion_step,
            max_distance=config.max_optical_range,
            extrapolated_weight=config.extrapolated_weight,
        )
        estimate = FrameEstimate(
            frame=k, match=match, course=course,
            optical_valid=optical.valid,
            lane_fraction=_ego_lane_fraction(dmap, match),
        )
        frames.append(estimate)
        if writer is not None:
            writer.frame(estimate, optical)

    report = None
    if sdir.truth:
        report = evaluate(
            frames, sdir.truth,
            max_distance=config.eval_max_distance,
            settle_frames=min(config.eval_settle_frames, sdir.n_frames - 1),
        )
    if writer is not None:
        writer.finish(report)
    return PipelineResult(frames=frames, report=report)


def lane_center_course(course: FusedRoadCourse, fraction: float) -> np.ndarray:
    """Lane center as a cross-road interpolation of the two borders."""
    return course.right_y + fraction * (course.left_y - course.right_y)


def evaluate(frames: List[FrameEstimate], truth,
             max_distance: float = 30.0, step: float = 1.0,
             settle_frames: int = 0) -> EvaluationReport:
    """Mean lateral deviation per look-ahead distance against truth.

    For each frame and distance d, the truth-trajectory point d meters
    ahead along the path is expressed in that frame's truth vehicle
    frame; the estimated ego-lane center is read at the point's forward
    coordinate. Distances past the trajectory end are excluded.

    ``settle_frames`` drops the first frames from the aggregate: right
    after startup the matcher is still pulling out of the GPS-sized
    initialization spread, and those transients say nothing about the
    course estimators being compared.
    """
    if frames and settle_frames > max(est.frame for est in frames):
        raise InvalidInputError("settle_frames leaves no frame to evaluate")
    positions = np.array([st.pose.position for st in truth])
    seg = np.linalg.norm(np.diff(positions, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = float(cum[-1])

    distances = np.arange(0.0, max_distance + step / 2.0, step)
    errors = np.full((len(frames), distances.size), np.nan)
    for i, est in enumerate(frames):
        if est.frame < settle_frames:
            continue
        st = truth[est.frame]
        center = lane_center_course(est.course, est.lane_fraction)
        c, s = np.cos(-st.pose.heading), np.sin(-st.pose.heading)
        arcs = cum[est.frame] + distances
        ok = arcs <= total
        tx = np.interp(arcs[ok], cum, positions[:, 0]) - st.pose.x
        ty = np.interp(arcs[ok], cum, positions[:, 1]) - st.pose.y
        x_p = tx * c - ty * s
        y_p = tx * s + ty * c
        y_hat = np.interp(x_p, est.course.d, center)
        errors[i, ok] = np.abs(y_hat - y_p)

    profile = np.nanmean(errors, axis=0)
    availability = (
        float(np.mean([e.optical_valid for e in frames])) if frames else 0.0
    )
    return EvaluationReport(
        mean_short_range_error=float(np.nanmean(profile)),
        distances=distances,
        error_profile=profile,
        optical_availability=availability,
        n_frames=len(frames),
    )


class _RunWriter:
    """Streams per-frame artifacts and the final report to a run dir."""

    def __init__(self, out_dir, config: PipelineConfig,
                 preset: str = "", mode: str = MODE_FUSED):
        self.root = str(out_dir)
        self.preset = preset
        self.mode = mode
        os.makedirs(self.root, exist_ok=True)
        save_config(config, os.path.join(self.root, "pipeline.cfg"))
        self._match = open(os.path.join(self.root, "match.csv"), "w", newline="")
        self._match.write("frame,s_hat,d_hat,psi_hat,confidence\n")
        self._frames = open(os.path.join(self.root, "frames.csv"), "w", newline="")
        self._frames.write("frame,optical_valid,mode,lane_fraction\n")

    def frame(self, est: FrameEstimate, optical):
        d = frame_dir(self.root, est.frame)
        os.makedirs(d, exist_ok=True)
        write_optical_map(optical, os.path.join(d, "optical.csv"))
        write_fused_course(est.course, os.path.join(d, "fused.csv"))
        self._match.write("%d,%.6f,%.6f,%.6f,%.6f\n" % (
            est.frame, est.match.s_hat, est.match.d_hat,
            est.match.psi_hat, est.match.confidence,
        ))
        self._frames.write("%d,%d,%s,%.6f\n" % (
            est.frame, int(est.optical_valid), est.course.mode,
            est.lane_fraction,
        ))

    def finish(self, report: Optional[EvaluationReport]):
        self._match.close()
        self._frames.close()
        if report is not None:
            write_report(report, self.root, preset=self.preset, mode=self.mode)


def write_report(report: EvaluationReport, out_dir, preset: str = "",
                 mode: str = MODE_FUSED):
    with open(os.path.join(out_dir, "report.csv"), "w", newline="") as fh:
        fh.write("metric,value\n")
        if preset:
            fh.write("preset,%s\n" % preset)
        fh.write("mode,%s\n" % mode)
        fh.write("mean_short_range_error_m,%.6f\n" % report.mean_short_range_error)
        fh.write("optical_availability,%.6f\n" % report.optical_availability)
        fh.write("n_frames,%d\n" % report.n_frames)
    with open(os.path.join(out_dir, "error_profile.csv"), "w", newline="") as fh:
        fh.write("d_m,mean_error_m\n")
        for d, e in zip(report.distances, report.error_profile):
            fh.write("%.6f,%.6f\n" % (d, e))
