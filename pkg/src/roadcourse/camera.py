"""Flat-ground pinhole camera model.

The camera sits ``height`` meters above the road plane at the vehicle
origin, pitched down by ``pitch`` radians. Vehicle frame: x forward,
y left, z up. Image frame: u right, v down, origin at the top-left
pixel center.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import PipelineConfig


@dataclass(frozen=True)
class CameraModel:
    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    cam_height: float
    pitch: float

    @classmethod
    def from_config(cls, config: PipelineConfig) -> "CameraModel":
        return cls(
            width=config.image_width,
            height=config.image_height,
            fx=config.focal_px,
            fy=config.focal_px,
            cx=(config.image_width - 1) / 2.0,
            cy=(config.image_height - 1) / 2.0,
            cam_height=config.camera_height,
            pitch=config.camera_pitch,
        )

    @property
    def horizon_row(self) -> float:
        """Image row of the flat-ground horizon; ground exists below it."""
        return self.cy - self.fy * math.tan(self.pitch)

    def ground_to_image(self, points):
        """Ground points (..., 2) in vehicle frame to (u, v, visible).

        ``visible`` is True where the point projects in front of the
        camera; no image-bounds clipping is applied.
        """
        p = np.asarray(points, dtype=float)
        x, y = p[..., 0], p[..., 1]
        cp, sp = math.cos(self.pitch), math.sin(self.pitch)
        # camera-frame coordinates: X right, Y down, Z optical axis
        cam_x = -y
        cam_y = -x * sp + self.cam_height * cp
        cam_z = x * cp + self.cam_height * sp
        visible = cam_z > 1e-9
        z = np.where(visible, cam_z, 1.0)
        u = self.cx + self.fx * cam_x / z
        v = self.cy + self.fy * cam_y / z
        return u, v, visible

    def image_to_ground(self, u, v):
        """Pixels to ground points (..., 2); valid only below the horizon."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        a = (u - self.cx) / self.fx
        b = (v - self.cy) / self.fy
        cp, sp = math.cos(self.pitch), math.sin(self.pitch)
        denom = b * cp + sp  # > 0 strictly below the horizon row
        valid = denom > 1e-9
        t = np.where(valid, self.cam_height / np.where(valid, denom, 1.0), np.nan)
        x = t * (cp - b * sp)
        y = t * (-a)
        return np.stack([x, y], axis=-1), valid
