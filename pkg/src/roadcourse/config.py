"""Pipeline-wide configuration.

A flat key=value text file maps 1:1 onto :class:`PipelineConfig`; unknown
keys are rejected so typos surface early. All lengths are meters, angles
radians, rates hertz.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .errors import DataError, InvalidInputError


@dataclass(frozen=True)
class PipelineConfig:
    # occupancy grid
    grid_cell_size: float = 0.25
    grid_extent: float = 120.0
    grid_forward_bias: float = 20.0
    grid_alpha: float = 0.4
    grid_decay: float = 0.95
    static_gate: float = 1.0
    # optical map binning
    bin_length: float = 2.0
    max_optical_range: float = 60.0
    bin_history: int = 30
    bin_min_count: int = 3
    bin_iqr_max: float = 0.5
    # road detection
    min_component_fraction: float = 0.005
    occlusion_radius: int = 2
    # fusion
    fusion_d0: float = 10.0
    fusion_d1: float = 40.0
    fusion_step: float = 1.0
    extrapolated_weight: float = 0.5
    # map matching
    particle_count: int = 800
    map_window: float = 150.0
    score_temperature: float = 2.0
    score_range: float = 70.0
    pf_s_noise: float = 0.5
    pf_d_noise: float = 0.15
    pf_psi_noise: float = 0.01
    # ego-motion filter
    ekf_accel_std: float = 0.5
    ekf_turn_accel_std: float = 0.1
    odom_speed_std: float = 0.1
    odom_yaw_std: float = 0.004
    # camera (pinhole, flat ground)
    image_width: int = 200
    image_height: int = 150
    focal_px: float = 140.0
    camera_height: float = 1.5
    camera_pitch: float = 0.09
    # timing / evaluation; the settle window drops matcher-warmup frames
    # from aggregate error reports
    frame_rate: float = 20.0
    eval_max_distance: float = 30.0
    eval_settle_frames: int = 10
    seed: int = 0

    def __post_init__(self):
        for name in (
            "grid_cell_size",
            "grid_extent",
            "bin_length",
            "max_optical_range",
            "fusion_step",
            "frame_rate",
            "focal_px",
            "camera_height",
        ):
            if not getattr(self, name) > 0.0:
                raise InvalidInputError(f"{name} must be > 0")
        if not self.fusion_d0 < self.fusion_d1:
            raise InvalidInputError("fusion_d0 must be < fusion_d1")
        if self.particle_count < 1:
            raise InvalidInputError("particle_count must be >= 1")

    @property
    def dt(self) -> float:
        return 1.0 / self.frame_rate


_INT_FIELDS = {
    f.name for f in fields(PipelineConfig) if f.type in ("int",) or f.type is int
}


def load_config(path) -> PipelineConfig:
    """Read key=value lines; '#' starts a comment; blank lines ignored."""
    values = {}
    known = {f.name for f in fields(PipelineConfig)}
    try:
        with open(path, "r") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise DataError(f"{path}:{lineno}: expected key=value")
                key, _, val = line.partition("=")
                key = key.strip()
                if key not in known:
                    raise DataError(f"{path}:{lineno}: unknown key {key!r}")
                values[key] = int(val) if key in _INT_FIELDS else float(val)
    except (ValueError, OSError) as exc:
        raise DataError(f"{path}: {exc}") from exc
    return PipelineConfig(**values)


def save_config(config: PipelineConfig, path) -> None:
    with open(path, "w") as fh:
        for f in fields(PipelineConfig):
            fh.write(f"{f.name}={getattr(config, f.name)}\n")


def with_overrides(config: PipelineConfig, **kwargs) -> PipelineConfig:
    return replace(config, **kwargs)
