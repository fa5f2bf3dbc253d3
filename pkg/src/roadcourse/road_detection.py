"""Road-border extraction from a per-pixel class map.

The stages mirror how a human would outline the road in an image:

1. keep the biggest 8-connected patch of road pixels, drop stray blobs;
2. fill enclosed holes (non-road pockets unreachable from outside);
3. trace the closed contour of the patch;
4. split the contour at its top into a left and a right border;
5. discard contour pixels that touch the image frame or sit next to
   other road users (they outline an occluder, not the road);
6. back-project the survivors onto the flat ground plane.

Pixels flagged in step 5 never receive a ground point; each carries
exactly one reason.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np
from scipy import ndimage

from .camera import CameraModel
from .errors import NoBorderError, NoRoadError
from .labeling import ROAD, VEHICLE, VRU, ClassMembershipMap

REASON_IMAGE_BORDER = "image-border"
REASON_OCCLUDED = "occluded-by-road-user"

_EIGHT = np.ones((3, 3), dtype=bool)
_FOUR = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)

# Moore neighborhood in counter-clockwise order (image rows grow down)
_MOORE = (
    (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1),
)


@dataclass(frozen=True)
class RoadSegment:
    """Largest connected road region after hole filling."""

    mask: np.ndarray
    size: int


@dataclass(frozen=True)
class BorderObservation:
    side: str
    row: int
    col: int
    ground: Optional[np.ndarray] = None
    ignored: bool = False
    reason: Optional[str] = None


def segment_road(labels: ClassMembershipMap,
                 min_fraction: float = 0.005) -> RoadSegment:
    """Biggest 8-connected road component with enclosed holes filled.

    Raises :class:`NoRoadError` when no road pixel exists or the biggest
    component is smaller than ``min_fraction`` of the image.
    """
    road = np.asarray(labels.labels) == ROAD
    if not road.any():
        raise NoRoadError("no road pixels in frame")
    comp, n = ndimage.label(road, structure=_EIGHT)
    sizes = np.bincount(comp.ravel())
    sizes[0] = 0
    biggest = int(np.argmax(sizes))
    size = int(sizes[biggest])
    if size < min_fraction * road.size:
        raise NoRoadError(
            f"largest road component has {size} px, "
            f"below {min_fraction:.1%} of the image"
        )
    mask = comp == biggest
    # Exterior flood fill over a padded background ring; the ring meets
    # the bottom row, so the fill is seeded at the bottom of the image
    # and sweeps around the component. Anything it cannot reach is an
    # enclosed hole and becomes road.
    padded = np.pad(mask, 1, constant_values=False)
    outside_lbl, _ = ndimage.label(~padded, structure=_FOUR)
    exterior = outside_lbl == outside_lbl[-1, 0]
    filled = (~exterior)[1:-1, 1:-1]
    return RoadSegment(mask=filled, size=int(filled.sum()))


def _trace_moore(mask: np.ndarray) -> List[tuple]:
    """Closed boundary walk of the single component in ``mask``."""
    rows, cols = np.nonzero(mask)
    top = rows.min()
    start = (int(top), int(cols[rows == top].min()))
    h, w = mask.shape

    def at(p):
        return 0 <= p[0] < h and 0 <= p[1] < w and mask[p]

    contour = [start]
    # enter scanning from the west neighbor, as if we arrived from the left
    prev_dir = 0
    cur = start
    limit = 4 * mask.size
    first_move = None
    while limit:
        limit -= 1
        for k in range(8):
            d = (prev_dir + k) % 8
            nxt = (cur[0] + _MOORE[d][0], cur[1] + _MOORE[d][1])
            if at(nxt):
                if nxt == start and first_move is not None:
                    return contour
                if first_move is None:
                    first_move = d
                contour.append(nxt)
                cur = nxt
                # next scan starts just past the direction back to the
                # pixel we came from
                prev_dir = (d + 5) % 8
                break
        else:
            return contour  # isolated pixel
    return contour


def extract_borders(segment: RoadSegment, labels: ClassMembershipMap,
                    occlusion_radius: int = 2,
                    include_vru: bool = True) -> List[BorderObservation]:
    """Contour -> left/right border pixels with ignore flags.

    The closed contour is split at its topmost pixel (ties resolved
    toward the image center column) and at its bottommost pixel; the arc
    whose mean column is smaller forms the left border.  Border pixels
    on the image frame are flagged, as are pixels within
    ``occlusion_radius`` (Chebyshev) of vehicle or vru pixels.
    """
    if not segment.mask.any():
        raise NoBorderError("empty road segment")
    contour = _trace_moore(segment.mask)
    if len(contour) < 8:
        raise NoBorderError(f"contour of {len(contour)} pixels is too short")
    pix = np.array(contour)
    h, w = segment.mask.shape

    def pick(rows_idx):
        # among candidate indices, the column closest to the center
        cols = pix[rows_idx, 1]
        return rows_idx[np.argmin(np.abs(cols - (w - 1) / 2.0))]

    top_idx = pick(np.flatnonzero(pix[:, 0] == pix[:, 0].min()))
    bot_idx = pick(np.flatnonzero(pix[:, 0] == pix[:, 0].max()))
    if top_idx == bot_idx:
        raise NoBorderError("degenerate contour: top and bottom coincide")
    lo, hi = sorted((int(top_idx), int(bot_idx)))
    arc_a = np.arange(lo, hi + 1)
    arc_b = np.concatenate([np.arange(hi, len(pix)), np.arange(0, lo + 1)])
    if pix[arc_a, 1].mean() <= pix[arc_b, 1].mean():
        left_arc, right_arc = arc_a, arc_b
    else:
        left_arc, right_arc = arc_b, arc_a

    actors = np.asarray(labels.labels) == VEHICLE
    if include_vru:
        actors |= np.asarray(labels.labels) == VRU
    if actors.any() and occlusion_radius > 0:
        occluded = ndimage.binary_dilation(
            actors, structure=_EIGHT, iterations=occlusion_radius
        )
    else:
        occluded = np.zeros_like(actors)

    out = []
    for side, arc in (("left", left_arc), ("right", right_arc)):
        # staircase runs put several contour pixels on one row; only the
        # outermost one measures the border, the rest lie inside the road
        outer = {}
        for i in arc:
            r, c = int(pix[i, 0]), int(pix[i, 1])
            if r not in outer:
                outer[r] = c
            elif side == "left":
                outer[r] = min(outer[r], c)
            else:
                outer[r] = max(outer[r], c)
        for r in sorted(outer):
            c = outer[r]
            obs = BorderObservation(side=side, row=r, col=c)
            if r == 0 or r == h - 1 or c == 0 or c == w - 1:
                obs = replace(obs, ignored=True, reason=REASON_IMAGE_BORDER)
            elif occluded[r, c]:
                obs = replace(obs, ignored=True, reason=REASON_OCCLUDED)
            out.append(obs)
    return out


def project_to_ground(obs: BorderObservation,
                      camera: CameraModel) -> Optional[BorderObservation]:
    """Attach the flat-ground point; None when at/above the horizon.

    Ignored observations pass through untouched so they never carry a
    ground point.
    """
    if obs.ignored:
        return obs
    ground, visible = camera.image_to_ground(float(obs.col), float(obs.row))
    if not bool(visible) or ground[0] <= 0.0:
        return None
    return replace(obs, ground=np.asarray(ground, dtype=np.float64))


def detect_borders(labels: ClassMembershipMap, camera: CameraModel,
                   min_fraction: float = 0.005, occlusion_radius: int = 2,
                   include_vru: bool = True) -> List[BorderObservation]:
    """Full chain: segment, trace, flag, project.

    Returns observations that either carry a ground point or are
    flagged with their ignore reason; above-horizon pixels are dropped.
    """
    segment = segment_road(labels, min_fraction=min_fraction)
    borders = extract_borders(
        segment, labels,
        occlusion_radius=occlusion_radius, include_vru=include_vru,
    )
    out = []
    for obs in borders:
        projected = project_to_ground(obs, camera)
        if projected is not None:
            out.append(projected)
    return out
