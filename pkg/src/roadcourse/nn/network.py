"""Multi-scale network: pyramid preprocessing, dense and patch inference.

Geometry conventions that make the two inference paths agree exactly:

* Pyramid level l+1 is the 2x2 block mean of level l (odd trailing
  rows/columns dropped), then each level is locally normalized.
* All convolutions are valid, so a branch maps an H x W level to an
  (H-R+1) x (W-R+1) feature map, R being the receptive field.
* Dense pooling is overlapping (stride 1) followed by fragmentation:
  every fragment is split into the 4 subsampled arrays x[a::2, c::2].
  A fragment with offset o and subsampling stride D holds the values a
  stride-2 pooling chain would produce at lattice positions o + D*t.
* Defragmentation interleaves the fragments back onto the full lattice,
  yielding one feature value per input window position.
* The branch output of level l is upscaled by pixel replication
  (factor 2^l) and cropped to the common size, so dense-output pixel p
  reads the level-l feature at floor(p / 2^l). Patch inference for
  output pixel p therefore extracts the level-l window anchored at
  floor(p / 2^l).

Dense-output pixel p classifies input pixel p + R//2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import ConfigError, InvalidInputError, NumericError
from ..labeling import ClassMembershipMap
from .layers import conv2d, maxpool2, overlap_pool, relu, softmax
from .topology import TopologyConfig


def local_normalize(image, window: int = 15, var_floor: float = 1e-4) -> np.ndarray:
    """Zero-mean unit-variance normalization over a clipped box window."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise InvalidInputError("image must be 2D")
    mean = _box_mean(img, window)
    var = np.maximum(_box_mean(img * img, window) - mean * mean, 0.0)
    return (img - mean) / np.sqrt(var + var_floor)


def _box_mean(img: np.ndarray, window: int) -> np.ndarray:
    r = window // 2
    h, w = img.shape
    ii = np.zeros((h + 1, w + 1), dtype=np.float64)
    ii[1:, 1:] = img.cumsum(axis=0).cumsum(axis=1)
    y0 = np.clip(np.arange(h) - r, 0, h)
    y1 = np.clip(np.arange(h) + r + 1, 0, h)
    x0 = np.clip(np.arange(w) - r, 0, w)
    x1 = np.clip(np.arange(w) + r + 1, 0, w)
    area = (y1 - y0)[:, None] * (x1 - x0)[None, :]
    total = (
        ii[np.ix_(y1, x1)] - ii[np.ix_(y0, x1)] - ii[np.ix_(y1, x0)] + ii[np.ix_(y0, x0)]
    )
    return total / area


def build_pyramid(
    image,
    n_l: int,
    norm_window: int = 15,
    var_floor: float = 1e-4,
    min_level_size: int = 1,
    dtype=np.float32,
) -> list:
    """Normalized image pyramid: n_l levels, each half the previous size.

    ``min_level_size`` is the receptive field the coarsest level must
    still accommodate; violating it raises an error naming the minimum
    input size.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise InvalidInputError("image must be 2D")
    levels = []
    cur = img
    for level in range(n_l):
        if level > 0:
            h = cur.shape[0] // 2 * 2
            w = cur.shape[1] // 2 * 2
            cur = cur[:h, :w].reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))
        if min(cur.shape) < min_level_size:
            need = min_level_size * (1 << (n_l - 1))
            raise InvalidInputError(
                f"image {img.shape[0]}x{img.shape[1]} too small for {n_l} levels; "
                f"needs at least {need}x{need}"
            )
        levels.append(local_normalize(cur, norm_window, var_floor).astype(dtype))
    return levels


# -- weights ---------------------------------------------------------------


@dataclass
class LayerWeights:
    w: np.ndarray  # (out, in, k, k)
    b: np.ndarray  # (out,)


@dataclass
class NetWeights:
    """All parameters: per-level conv layers plus the 1x1 output layer."""

    topology: TopologyConfig
    branches: list  # [level][conv index] -> LayerWeights
    fc: LayerWeights  # w: (n_classes, fc_input_channels, 1, 1)

    def copy(self) -> "NetWeights":
        return NetWeights(
            self.topology,
            [[LayerWeights(lw.w.copy(), lw.b.copy()) for lw in br] for br in self.branches],
            LayerWeights(self.fc.w.copy(), self.fc.b.copy()),
        )


def init_weights(
    topology: TopologyConfig, seed_or_rng=0, std: float = 0.01, dtype=np.float32
) -> NetWeights:
    """Gaussian-initialized weights (std 0.01 default), zero biases."""
    rng = (
        seed_or_rng
        if isinstance(seed_or_rng, np.random.Generator)
        else np.random.default_rng(seed_or_rng)
    )
    k = topology.k_c
    branches = []
    for _ in range(topology.n_l):
        layers = []
        for out_ch, in_ch in topology.conv_shapes():
            layers.append(
                LayerWeights(
                    rng.normal(0.0, std, (out_ch, in_ch, k, k)).astype(dtype),
                    np.zeros(out_ch, dtype=dtype),
                )
            )
        branches.append(layers)
    fc = LayerWeights(
        rng.normal(0.0, std, (topology.n_classes, topology.fc_input_channels(), 1, 1)).astype(
            dtype
        ),
        np.zeros(topology.n_classes, dtype=dtype),
    )
    return NetWeights(topology, branches, fc)


def check_weights(weights: NetWeights) -> None:
    """Raise ConfigError when shapes do not match the topology."""
    topo = weights.topology
    shapes = topo.conv_shapes()
    if len(weights.branches) != topo.n_l:
        raise ConfigError("branch count does not match n_l")
    for level, branch in enumerate(weights.branches):
        if len(branch) != len(shapes):
            raise ConfigError(f"level {level}: expected {len(shapes)} conv layers")
        for i, (lw, (out_ch, in_ch)) in enumerate(zip(branch, shapes)):
            if lw.w.shape != (out_ch, in_ch, topo.k_c, topo.k_c) or lw.b.shape != (out_ch,):
                raise ConfigError(f"level {level} conv {i}: bad weight shape {lw.w.shape}")
    if weights.fc.w.shape != (topo.n_classes, topo.fc_input_channels(), 1, 1):
        raise ConfigError(f"output layer shape {weights.fc.w.shape} does not match topology")


# -- fragmentation ---------------------------------------------------------


@dataclass
class FeatureMapArray:
    """Fragmented feature maps of one branch.

    ``fragments[i]`` is a (channels, h, w) array whose element t maps to
    position offsets[i] + stride * t of the unfragmented lattice.
    """

    fragments: list
    offsets: list
    stride: int = 1

    def __post_init__(self):
        channels = {f.shape[0] for f in self.fragments}
        if len(channels) > 1:
            raise ConfigError("fragments must share their channel count")
        if len(self.fragments) != len(self.offsets):
            raise ConfigError("one offset per fragment required")


def fragment_array(x: np.ndarray, strides: Sequence[int]) -> FeatureMapArray:
    """Split (C, H, W) into prod(s^2) subsampled fragments (no pooling)."""
    fma = FeatureMapArray([np.asarray(x)], [(0, 0)], 1)
    for s in strides:
        frags, offs = [], []
        for frag, (oy, ox) in zip(fma.fragments, fma.offsets):
            for a in range(s):
                for c in range(s):
                    frags.append(frag[:, a::s, c::s])
                    offs.append((oy + a * fma.stride, ox + c * fma.stride))
        fma = FeatureMapArray(frags, offs, fma.stride * s)
    return fma


def defragment(fma: FeatureMapArray) -> np.ndarray:
    """Interleave fragments back onto the full-resolution lattice."""
    if not fma.fragments:
        raise ConfigError("nothing to defragment")
    channels = fma.fragments[0].shape[0]
    stride = fma.stride
    out_h = max(oy + stride * (f.shape[1] - 1) for f, (oy, _) in zip(fma.fragments, fma.offsets)) + 1
    out_w = max(ox + stride * (f.shape[2] - 1) for f, (_, ox) in zip(fma.fragments, fma.offsets)) + 1
    out = np.zeros((channels, out_h, out_w), dtype=fma.fragments[0].dtype)
    seen = np.zeros((out_h, out_w), dtype=bool)
    for frag, (oy, ox) in zip(fma.fragments, fma.offsets):
        _, h, w = frag.shape
        sl = (slice(oy, oy + stride * h, stride), slice(ox, ox + stride * w, stride))
        out[:, sl[0], sl[1]] = frag
        seen[sl] = True
    if not seen.all():
        raise ConfigError("fragment offsets leave lattice gaps")
    return out


def _fragment_pool(fma: FeatureMapArray) -> FeatureMapArray:
    """Overlapping 2x2 pooling followed by the 4-way fragmentation."""
    frags, offs = [], []
    for frag, (oy, ox) in zip(fma.fragments, fma.offsets):
        pooled = overlap_pool(frag[None])[0]
        for a in (0, 1):
            for c in (0, 1):
                frags.append(pooled[:, a::2, c::2])
                offs.append((oy + a * fma.stride, ox + c * fma.stride))
    return FeatureMapArray(frags, offs, fma.stride * 2)


# -- inference -------------------------------------------------------------


def _check_finite(x: np.ndarray, where: str) -> None:
    if not np.isfinite(x).all():
        raise NumericError(f"non-finite activation at {where}")


def _dense_branch(level_image: np.ndarray, branch, topo: TopologyConfig, level: int) -> np.ndarray:
    """One branch on a full pyramid level; returns (C, H-R+1, W-R+1)."""
    fma = FeatureMapArray([level_image[None]], [(0, 0)], 1)
    li = 0
    for block in range(topo.n_b):
        for _ in range(topo.n_c):
            lw = branch[li]
            fragments = []
            for frag in fma.fragments:
                out = relu(conv2d(frag[None], lw.w, lw.b)[0])
                _check_finite(out, f"level {level} conv {li}")
                fragments.append(out)
            fma = FeatureMapArray(fragments, fma.offsets, fma.stride)
            li += 1
        if block < topo.n_p:
            fma = _fragment_pool(fma)
    feat = defragment(fma)
    h, w = level_image.shape
    r = topo.receptive_field
    if feat.shape[1:] != (h - r + 1, w - r + 1):
        raise ConfigError(
            f"level {level}: branch output {feat.shape[1:]} != expected "
            f"{(h - r + 1, w - r + 1)}"
        )
    return feat


def dense_logits(image, weights: NetWeights):
    """Dense inference up to the output layer.

    Returns:
        (logits, offset): logits (n_classes, H_out, W_out) and the
        input-pixel offset of output pixel (0, 0), i.e. R // 2.
    """
    topo = weights.topology
    check_weights(weights)
    r = topo.receptive_field
    pyramid = build_pyramid(image, topo.n_l, min_level_size=r, dtype=weights.fc.w.dtype)
    branch_maps = []
    for level, level_image in enumerate(pyramid):
        feat = _dense_branch(level_image, weights.branches[level], topo, level)
        factor = 1 << level
        if factor > 1:
            feat = feat.repeat(factor, axis=1).repeat(factor, axis=2)
        branch_maps.append(feat)
    out_h = min(f.shape[1] for f in branch_maps)
    out_w = min(f.shape[2] for f in branch_maps)
    stacked = np.concatenate([f[:, :out_h, :out_w] for f in branch_maps], axis=0)
    logits = conv2d(stacked[None], weights.fc.w, weights.fc.b)[0]
    _check_finite(logits, "output layer")
    return logits, topo.label_offset


def forward_dense(image, weights: NetWeights) -> ClassMembershipMap:
    """Whole-image inference: per-pixel class probabilities and labels."""
    logits, _ = dense_logits(image, weights)
    probs = softmax(logits, axis=0)
    return ClassMembershipMap(labels=probs.argmax(axis=0), probabilities=probs)


def _patch_branch(x: np.ndarray, branch, topo: TopologyConfig) -> np.ndarray:
    """One branch on a (B, 1, R, R) patch batch; returns (B, C, 1, 1)."""
    li = 0
    for block in range(topo.n_b):
        for _ in range(topo.n_c):
            lw = branch[li]
            x = relu(conv2d(x, lw.w, lw.b))
            li += 1
        if block < topo.n_p:
            x, _ = maxpool2(x)
    return x


def forward_patch(patches, weights: NetWeights) -> np.ndarray:
    """Patch inference: probability vector for one receptive-field window.

    ``patches`` is a single 2D array (n_l = 1) or a sequence of n_l 2D
    arrays of the topology's receptive-field size, one per pyramid
    level, pre-normalized (as produced by :func:`build_pyramid` plus
    :func:`extract_patch_windows`).
    """
    if isinstance(patches, np.ndarray) and patches.ndim == 2:
        patches = [patches]
    batch = forward_patch_batch([np.asarray(p)[None] for p in patches], weights)
    return batch[0]


def forward_patch_batch(level_batches, weights: NetWeights) -> np.ndarray:
    """Vectorized patch inference.

    Arguments:
        level_batches: n_l arrays of shape (B, R, R), batch-aligned.
        weights: network parameters.

    Returns:
        (B, n_classes) probabilities.
    """
    topo = weights.topology
    check_weights(weights)
    r = topo.receptive_field
    if len(level_batches) != topo.n_l:
        raise InvalidInputError(f"expected {topo.n_l} patch levels")
    feats = []
    for level, batch in enumerate(level_batches):
        batch = np.asarray(batch)
        if batch.ndim != 3 or batch.shape[1:] != (r, r):
            raise InvalidInputError(
                f"level {level}: patches must be {r}x{r} (receptive field), got "
                f"{batch.shape[1:]}"
            )
        x = batch[:, None].astype(weights.fc.w.dtype, copy=False)
        feat = _patch_branch(x, weights.branches[level], topo)
        if feat.shape[2:] != (1, 1):
            raise ConfigError(f"level {level}: patch did not reduce to 1x1")
        feats.append(feat)
    stacked = np.concatenate(feats, axis=1)
    logits = conv2d(stacked, weights.fc.w, weights.fc.b)[:, :, 0, 0]
    _check_finite(logits, "output layer")
    return softmax(logits, axis=1)


def extract_patch_windows(pyramid, row: int, col: int, r: int) -> list:
    """Per-level windows for dense-output pixel (row, col).

    Level l uses the window anchored at floor(p / 2^l); see the module
    docstring for why this matches dense inference.
    """
    windows = []
    for level, img in enumerate(pyramid):
        y = row >> level
        x = col >> level
        if y + r > img.shape[0] or x + r > img.shape[1]:
            raise InvalidInputError(f"output pixel ({row}, {col}) outside valid region")
        windows.append(img[y : y + r, x : x + r])
    return windows


def dense_output_shape(topology: TopologyConfig, image_shape) -> tuple:
    """Dense output size for a given input size (before any upscaling crop)."""
    r = topology.receptive_field
    h, w = image_shape
    out_h, out_w = None, None
    for level in range(topology.n_l):
        if level > 0:
            h, w = h // 2, w // 2
        span_h = (h - r + 1) * (1 << level)
        span_w = (w - r + 1) * (1 << level)
        out_h = span_h if out_h is None else min(out_h, span_h)
        out_w = span_w if out_w is None else min(out_w, span_w)
    return out_h, out_w
