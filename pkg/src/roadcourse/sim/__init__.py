"""Synthetic scenario generation: road, trajectory, sensors, labels."""

from .render import camera_for, degrade, render_labels, render_truth
from .scenario import (
    PRESET_ORDER,
    PRESETS,
    GroundTruthState,
    Scenario,
    ScenarioConfig,
    generate,
    preset_config,
)
from .sensors import emit_gps, emit_odometry, emit_radar
from .io import (
    FrameData,
    ScenarioDir,
    count_frames,
    frame_dir,
    load_scenario_config,
    read_frame,
    read_truth_trajectory,
    save_scenario_config,
    simulate_to_dir,
    write_scenario,
)

__all__ = [
    "PRESET_ORDER",
    "PRESETS",
    "FrameData",
    "GroundTruthState",
    "Scenario",
    "ScenarioConfig",
    "ScenarioDir",
    "camera_for",
    "count_frames",
    "degrade",
    "emit_gps",
    "emit_odometry",
    "emit_radar",
    "frame_dir",
    "generate",
    "load_scenario_config",
    "preset_config",
    "read_frame",
    "read_truth_trajectory",
    "render_labels",
    "render_truth",
    "save_scenario_config",
    "simulate_to_dir",
    "write_scenario",
]
