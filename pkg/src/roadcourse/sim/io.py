"""Scenario directory serialization.

Layout:
    scenario.cfg            key=value dump of the generator config
    truth_trajectory.csv    t_s,x_m,y_m,heading_rad,v_mps,omega_radps
    shape_points.csv        map database extract
    frame_000000/
        labels_truth.pgm    per-pixel class ids, maxval 5
        labels_noisy.pgm    corrupted variant fed to the pipeline
        radar.csv           range_m,azimuth_rad,relvel_mps
        odom.csv            fl_mps,fr_mps,rl_mps,rr_mps,yaw_radps
        gps.csv             x_m,y_m

All floats are written with six decimals so regenerating a scenario
reproduces byte-identical files.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, fields

import numpy as np

from ..errors import DataError
from ..geometry import Pose2, read_shape_points, write_shape_points
from ..labeling import ClassMembershipMap, read_labels, write_labels
from .render import render_labels
from .scenario import GroundTruthState, Scenario, ScenarioConfig, generate
from .sensors import emit_gps, emit_odometry, emit_radar

_TRAJ_HEADER = ["t_s", "x_m", "y_m", "heading_rad", "v_mps", "omega_radps"]
_RADAR_HEADER = ["range_m", "azimuth_rad", "relvel_mps"]
_ODOM_HEADER = ["fl_mps", "fr_mps", "rl_mps", "rr_mps", "yaw_radps"]
_GPS_HEADER = ["x_m", "y_m"]


def frame_dir(root, index: int) -> str:
    return os.path.join(root, f"frame_{index:06d}")


def save_scenario_config(config: ScenarioConfig, path) -> None:
    with open(path, "w") as fh:
        for f in fields(ScenarioConfig):
            value = getattr(config, f.name)
            if isinstance(value, bool):
                value = int(value)
            elif isinstance(value, float):
                value = repr(value)
            fh.write(f"{f.name}={value}\n")


def load_scenario_config(path) -> ScenarioConfig:
    spec = {f.name: f.type for f in fields(ScenarioConfig)}
    values = {}
    try:
        with open(path, "r") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise DataError(f"{path}:{lineno}: expected key=value")
                key, _, val = line.partition("=")
                key, val = key.strip(), val.strip()
                if key not in spec:
                    raise DataError(f"{path}:{lineno}: unknown key {key!r}")
                kind = spec[key]
                if kind in ("bool", bool):
                    values[key] = bool(int(val))
                elif kind in ("int", int):
                    values[key] = int(val)
                elif kind in ("float", float):
                    values[key] = float(val)
                else:
                    values[key] = val
    except (ValueError, OSError) as exc:
        raise DataError(f"{path}: {exc}") from exc
    return ScenarioConfig(**values)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{v:.6f}" for v in row])


def _read_csv(path, header):
    try:
        with open(path, "r", newline="") as fh:
            reader = csv.reader(fh)
            got = next(reader, None)
            if got != header:
                raise DataError(f"{path}: expected header {','.join(header)}")
            return np.array(
                [[float(v) for v in row] for row in reader if row],
                dtype=np.float64,
            ).reshape(-1, len(header))
    except (ValueError, OSError) as exc:
        raise DataError(f"{path}: {exc}") from exc


def write_scenario(scenario: Scenario, out_dir) -> None:
    """Serialize every frame of the scenario under ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    save_scenario_config(scenario.config, os.path.join(out_dir, "scenario.cfg"))
    _write_csv(
        os.path.join(out_dir, "truth_trajectory.csv"),
        _TRAJ_HEADER,
        [
            (st.t, st.pose.x, st.pose.y, st.pose.heading, st.v, st.omega)
            for st in scenario.trajectory
        ],
    )
    write_shape_points(
        os.path.join(out_dir, "shape_points.csv"), scenario.shape_points
    )
    for i in range(scenario.n_frames):
        fdir = frame_dir(out_dir, i)
        os.makedirs(fdir, exist_ok=True)
        truth, noisy = render_labels(scenario, i)
        write_labels(os.path.join(fdir, "labels_truth.pgm"), truth)
        write_labels(os.path.join(fdir, "labels_noisy.pgm"), noisy)
        _write_csv(os.path.join(fdir, "radar.csv"), _RADAR_HEADER,
                   emit_radar(scenario, i))
        wheels, yaw = emit_odometry(scenario, i)
        _write_csv(os.path.join(fdir, "odom.csv"), _ODOM_HEADER,
                   [list(wheels) + [yaw]])
        _write_csv(os.path.join(fdir, "gps.csv"), _GPS_HEADER,
                   [emit_gps(scenario, i)])


def simulate_to_dir(config: ScenarioConfig, out_dir) -> Scenario:
    scenario = generate(config)
    write_scenario(scenario, out_dir)
    return scenario


# -- reading ---------------------------------------------------------------


@dataclass(frozen=True)
class FrameData:
    """One frame's sensor bundle as read back from disk."""

    labels_noisy: ClassMembershipMap
    radar: np.ndarray
    wheel_speeds: np.ndarray
    yaw_rate: float
    gps: np.ndarray


def read_truth_trajectory(path):
    rows = _read_csv(path, _TRAJ_HEADER)
    return [
        GroundTruthState(Pose2(x, y, h), v, om, t)
        for t, x, y, h, v, om in rows
    ]


def count_frames(root) -> int:
    n = 0
    while os.path.isdir(frame_dir(root, n)):
        n += 1
    return n


def read_frame(root, index: int, with_truth: bool = False):
    fdir = frame_dir(root, index)
    if not os.path.isdir(fdir):
        raise DataError(f"missing frame directory {fdir}")
    noisy = read_labels(os.path.join(fdir, "labels_noisy.pgm"))
    radar = _read_csv(os.path.join(fdir, "radar.csv"), _RADAR_HEADER)
    odom = _read_csv(os.path.join(fdir, "odom.csv"), _ODOM_HEADER)
    if odom.shape[0] != 1:
        raise DataError(f"{fdir}/odom.csv: expected exactly one row")
    gps = _read_csv(os.path.join(fdir, "gps.csv"), _GPS_HEADER)
    if gps.shape[0] != 1:
        raise DataError(f"{fdir}/gps.csv: expected exactly one row")
    frame = FrameData(
        labels_noisy=noisy,
        radar=radar,
        wheel_speeds=odom[0, :4],
        yaw_rate=float(odom[0, 4]),
        gps=gps[0],
    )
    if with_truth:
        truth = read_labels(os.path.join(fdir, "labels_truth.pgm"))
        return frame, truth
    return frame


class ScenarioDir:
    """Read access to a serialized scenario."""

    def __init__(self, root):
        self.root = root
        cfg_path = os.path.join(root, "scenario.cfg")
        if not os.path.isfile(cfg_path):
            raise DataError(f"missing {cfg_path}")
        self.config = load_scenario_config(cfg_path)
        self.truth = read_truth_trajectory(
            os.path.join(root, "truth_trajectory.csv")
        )
        self.shape_points = read_shape_points(
            os.path.join(root, "shape_points.csv")
        )
        self.n_frames = count_frames(root)

    def frame(self, index: int, with_truth: bool = False):
        return read_frame(self.root, index, with_truth)
