"""Radar occupancy grid.

A world-axis-aligned square grid follows the vehicle: each frame it is
recentered ahead of the ego pose in whole-cell steps, so cell contents
never blur — a shift moves values, it does not resample them.  Static
radar reflections (selected by a relative-velocity gate) accumulate
linearly with decay, which keeps every cell inside [0, 1] and lets
persistent structure like curbs and barriers win over noise.

Columns index world x and rows index world y; the anchor is the world
coordinate of the (0, 0) cell corner and always lies on the cell lattice.
"""

from __future__ import annotations

import numpy as np

from .ego_motion import EgoState
from .errors import InvalidInputError
from .geometry import Pose2
from .pgm import write_pgm


class GridMap:
    """Occupancy values in [0, 1] over a square, vehicle-following window.

    Attributes:
        cells: (n, n) float array, ``cells[row, col]``; row = y, col = x.
        cell_size: cell edge length in meters.
        extent: grid edge length in meters.
        anchor: world (x, y) of the lower-left cell corner, lattice-aligned.
        subcell: (x, y) remainder below one cell from the last recenter.
        dropped: reflections discarded so far for falling outside the grid.
    """

    def __init__(self, cell_size: float = 0.25, extent: float = 120.0,
                 center=(0.0, 0.0)):
        if not (cell_size > 0.0 and extent > cell_size):
            raise InvalidInputError("need cell_size > 0 and extent > cell_size")
        self.cell_size = float(cell_size)
        self.extent = float(extent)
        n = int(round(extent / cell_size))
        self.cells = np.zeros((n, n), dtype=np.float64)
        desired = (center[0] - 0.5 * extent, center[1] - 0.5 * extent)
        ax = np.floor(desired[0] / cell_size) * cell_size
        ay = np.floor(desired[1] / cell_size) * cell_size
        self.anchor = (ax, ay)
        self.subcell = (desired[0] - ax, desired[1] - ay)
        self.dropped = 0

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    def copy(self) -> "GridMap":
        out = GridMap.__new__(GridMap)
        out.cell_size = self.cell_size
        out.extent = self.extent
        out.cells = self.cells.copy()
        out.anchor = self.anchor
        out.subcell = self.subcell
        out.dropped = self.dropped
        return out

    def cell_index(self, points):
        """World (N, 2) points -> (rows, cols, inside-mask)."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        cols = np.floor((pts[:, 0] - self.anchor[0]) / self.cell_size).astype(int)
        rows = np.floor((pts[:, 1] - self.anchor[1]) / self.cell_size).astype(int)
        n = self.n_cells
        inside = (rows >= 0) & (rows < n) & (cols >= 0) & (cols < n)
        return rows, cols, inside

    def cell_center(self, rows, cols):
        x = self.anchor[0] + (np.asarray(cols) + 0.5) * self.cell_size
        y = self.anchor[1] + (np.asarray(rows) + 0.5) * self.cell_size
        return np.stack([x, y], axis=-1)

    def sample(self, points) -> np.ndarray:
        """Occupancy at world points by nearest cell; 0 outside the grid."""
        rows, cols, inside = self.cell_index(points)
        out = np.zeros(rows.shape, dtype=np.float64)
        out[inside] = self.cells[rows[inside], cols[inside]]
        return out

    def sample_bilinear(self, points) -> np.ndarray:
        """Occupancy interpolated between cell centers; 0 outside."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        fx = (pts[:, 0] - self.anchor[0]) / self.cell_size - 0.5
        fy = (pts[:, 1] - self.anchor[1]) / self.cell_size - 0.5
        c0 = np.floor(fx).astype(int)
        r0 = np.floor(fy).astype(int)
        tx = fx - c0
        ty = fy - r0
        n = self.n_cells
        out = np.zeros(len(pts), dtype=np.float64)
        for dr, dc, w in (
            (0, 0, (1 - ty) * (1 - tx)),
            (0, 1, (1 - ty) * tx),
            (1, 0, ty * (1 - tx)),
            (1, 1, ty * tx),
        ):
            r, c = r0 + dr, c0 + dc
            ok = (r >= 0) & (r < n) & (c >= 0) & (c < n)
            out[ok] += w[ok] * self.cells[r[ok], c[ok]]
        return out

    def integrate(self, reflections, ego: EgoState, alpha: float = 0.4,
                  decay: float = 0.95, static_gate: float = 1.0) -> "GridMap":
        """Decay all cells, then add static reflections.

        ``reflections`` is an (N, 3) array of (range_m, azimuth_rad,
        relvel_mps) in the vehicle frame.  A reflection counts as static
        when its relative velocity cancels the projected ego speed:
        |relvel + v * cos(azimuth)| < static_gate.  Each surviving
        reflection adds ``alpha`` to its cell; values clamp to [0, 1].

        The decay sets the grid's memory length.  A half-life around a
        dozen frames keeps the map fresh enough that slow ego-heading
        drift does not smear old border evidence against new; longer
        memories trade that registration quality for density.
        """
        self.cells *= decay
        refl = np.asarray(reflections, dtype=np.float64).reshape(-1, 3)
        if refl.shape[0]:
            rng, az, relvel = refl[:, 0], refl[:, 1], refl[:, 2]
            static = np.abs(relvel + ego.v * np.cos(az)) < static_gate
            rng, az = rng[static], az[static]
            local = np.stack([rng * np.cos(az), rng * np.sin(az)], axis=1)
            ch, sh = np.cos(ego.heading), np.sin(ego.heading)
            world = np.stack(
                [
                    ego.x + local[:, 0] * ch - local[:, 1] * sh,
                    ego.y + local[:, 0] * sh + local[:, 1] * ch,
                ],
                axis=1,
            )
            rows, cols, inside = self.cell_index(world)
            self.dropped += int(np.count_nonzero(~inside))
            np.add.at(self.cells, (rows[inside], cols[inside]), alpha)
            np.clip(self.cells, 0.0, 1.0, out=self.cells)
        return self

    def recenter(self, pose: Pose2, forward_bias: float = 20.0) -> "GridMap":
        """Shift the window so its center sits ``forward_bias`` m ahead.

        Only whole-cell shifts are applied; the remainder is kept in
        ``subcell``.  Vacated cells become 0, retained cells keep their
        world position exactly.
        """
        cx = pose.x + forward_bias * np.cos(pose.heading)
        cy = pose.y + forward_bias * np.sin(pose.heading)
        dax = cx - 0.5 * self.extent
        day = cy - 0.5 * self.extent
        sx = int(np.floor(dax / self.cell_size)) - int(
            round(self.anchor[0] / self.cell_size)
        )
        sy = int(np.floor(day / self.cell_size)) - int(
            round(self.anchor[1] / self.cell_size)
        )
        if sx or sy:
            n = self.n_cells
            fresh = np.zeros_like(self.cells)
            src_r = slice(max(0, sy), min(n, n + sy))
            dst_r = slice(max(0, -sy), min(n, n - sy))
            src_c = slice(max(0, sx), min(n, n + sx))
            dst_c = slice(max(0, -sx), min(n, n - sx))
            if src_r.start < src_r.stop and src_c.start < src_c.stop:
                fresh[dst_r, dst_c] = self.cells[src_r, src_c]
            self.cells = fresh
            self.anchor = (
                self.anchor[0] + sx * self.cell_size,
                self.anchor[1] + sy * self.cell_size,
            )
        self.subcell = (dax - self.anchor[0], day - self.anchor[1])
        return self


def save_grid(grid: GridMap, pgm_path, meta_path) -> None:
    """Dump the grid for inspection: occupancy x 255 plus a meta file."""
    img = np.round(grid.cells * 255.0).astype(np.uint8)
    write_pgm(pgm_path, img[::-1], maxval=255)
    with open(meta_path, "w") as fh:
        fh.write(f"cell_size={grid.cell_size}\n")
        fh.write(f"extent={grid.extent}\n")
        fh.write(f"anchor_x={grid.anchor[0]}\n")
        fh.write(f"anchor_y={grid.anchor[1]}\n")
