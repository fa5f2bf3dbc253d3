"""Patch-based SGD training and post-training bias tuning.

Training samples receptive-field windows class-balanced from labeled
images, runs the patch network (stride-2 pooling) and minimizes softmax
cross-entropy with plain SGD under linear learn-rate annealing. Given a
seed, a run is bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import InvalidInputError, NumericError
from ..metrics import accumulate, mcc
from .layers import (
    conv2d,
    conv2d_backward,
    maxpool2,
    maxpool2_backward,
    relu,
    relu_backward,
    softmax_cross_entropy,
)
from .network import (
    LayerWeights,
    NetWeights,
    build_pyramid,
    dense_logits,
    extract_patch_windows,
    init_weights,
)
from .topology import TopologyConfig


@dataclass(frozen=True)
class TrainConfig:
    learn_rate: float = 0.01
    epochs: int = 100
    anneal_epochs: Optional[int] = None  # defaults to `epochs`
    batch_size: int = 32
    patches_per_class: int = 16
    init_std: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if not self.learn_rate >= 0.0:
            raise InvalidInputError("learn_rate must be >= 0")
        if self.epochs < 1 or self.batch_size < 1 or self.patches_per_class < 1:
            raise InvalidInputError("epochs/batch_size/patches_per_class must be >= 1")


class _PatchSampler:
    """Pre-built pyramids plus per-class valid output positions."""

    def __init__(self, dataset, topology: TopologyConfig):
        self.topology = topology
        r = topology.receptive_field
        off = topology.label_offset
        self.pyramids = []
        positions = [[] for _ in range(topology.n_classes)]
        for img_idx, (image, labels) in enumerate(dataset):
            labels = np.asarray(labels)
            pyramid = build_pyramid(image, topology.n_l, min_level_size=r)
            self.pyramids.append(pyramid)
            # valid dense-output extent for this image
            out_h = min((lv.shape[0] - r + 1) * (1 << l) for l, lv in enumerate(pyramid))
            out_w = min((lv.shape[1] - r + 1) * (1 << l) for l, lv in enumerate(pyramid))
            sub = labels[off : off + out_h, off : off + out_w]
            for k in range(topology.n_classes):
                rows, cols = np.nonzero(sub == k)
                if len(rows):
                    entry = np.stack(
                        [np.full(len(rows), img_idx), rows, cols], axis=1
                    )
                    positions[k].append(entry)
        self.by_class = []
        missing = []
        for k, chunks in enumerate(positions):
            if chunks:
                self.by_class.append(np.concatenate(chunks, axis=0))
            else:
                self.by_class.append(None)
                missing.append(k)
        if missing:
            raise InvalidInputError(
                f"classes {missing} absent from the dataset (within the valid "
                f"output region)"
            )

    def sample_epoch(self, rng: np.random.Generator, per_class: int):
        picks = []
        for rows in self.by_class:
            idx = rng.integers(0, len(rows), size=per_class)
            picks.append(rows[idx])
        all_picks = np.concatenate(picks, axis=0)
        labels = np.repeat(np.arange(self.topology.n_classes), per_class)
        order = rng.permutation(len(all_picks))
        return all_picks[order], labels[order]

    def gather(self, picks: np.ndarray):
        r = self.topology.receptive_field
        level_batches = [
            np.empty((len(picks), r, r), dtype=np.float32)
            for _ in range(self.topology.n_l)
        ]
        for i, (img_idx, row, col) in enumerate(picks):
            windows = extract_patch_windows(self.pyramids[img_idx], row, col, r)
            for l, win in enumerate(windows):
                level_batches[l][i] = win
        return level_batches


def _forward_backward(level_batches, labels, weights: NetWeights):
    """One batch: loss plus gradients for every parameter."""
    topo = weights.topology
    feats = []
    caches = []
    for level in range(topo.n_l):
        x = level_batches[level][:, None].astype(weights.fc.w.dtype, copy=False)
        tape = []
        li = 0
        for block in range(topo.n_b):
            for _ in range(topo.n_c):
                lw = weights.branches[level][li]
                pre = conv2d(x, lw.w, lw.b)
                tape.append(("conv", li, x, pre))
                x = relu(pre)
                li += 1
            if block < topo.n_p:
                pooled, idx = maxpool2(x)
                tape.append(("pool", x.shape, idx))
                x = pooled
        feats.append(x)
        caches.append(tape)
    stacked = np.concatenate(feats, axis=1)
    logits = conv2d(stacked, weights.fc.w, weights.fc.b)[:, :, 0, 0]
    loss, dlogits = softmax_cross_entropy(logits, labels)

    dstacked, dfc_w, dfc_b = conv2d_backward(
        stacked, weights.fc.w, dlogits[:, :, None, None]
    )
    grads = {"fc": (dfc_w, dfc_b)}
    ch = topo.branch_channels()
    for level in range(topo.n_l):
        dx = dstacked[:, level * ch : (level + 1) * ch]
        conv_grads = {}
        for entry in reversed(caches[level]):
            if entry[0] == "pool":
                _, x_shape, idx = entry
                dx = maxpool2_backward(x_shape, idx, dx)
            else:
                _, li, x_in, pre = entry
                dpre = relu_backward(pre, dx)
                dx, dw, db = conv2d_backward(x_in, weights.branches[level][li].w, dpre)
                conv_grads[li] = (dw, db)
        grads[level] = conv_grads
    return loss, grads


def _apply_sgd(weights: NetWeights, grads, lr: float) -> None:
    for level, branch in enumerate(weights.branches):
        for li, lw in enumerate(branch):
            dw, db = grads[level][li]
            lw.w = (lw.w.astype(np.float64) - lr * dw).astype(lw.w.dtype)
            lw.b = (lw.b.astype(np.float64) - lr * db).astype(lw.b.dtype)
    dw, db = grads["fc"]
    weights.fc.w = (weights.fc.w.astype(np.float64) - lr * dw).astype(weights.fc.w.dtype)
    weights.fc.b = (weights.fc.b.astype(np.float64) - lr * db).astype(weights.fc.b.dtype)


def train(dataset, topology: TopologyConfig, config: TrainConfig):
    """SGD training on class-balanced patches.

    Arguments:
        dataset: sequence of (image, labels) pairs; every class of the
            topology must appear at least once.
        topology: network structure.
        config: optimization parameters.

    Returns:
        (weights, loss_trace): trained weights and per-epoch mean loss.
    """
    if not len(dataset):
        raise InvalidInputError("dataset is empty")
    sampler = _PatchSampler(dataset, topology)
    rng = np.random.default_rng(config.seed)
    weights = init_weights(topology, rng, config.init_std, dtype=np.float32)
    anneal = config.anneal_epochs or config.epochs
    trace = []
    for epoch in range(config.epochs):
        lr = config.learn_rate * max(0.0, 1.0 - epoch / anneal)
        picks, labels = sampler.sample_epoch(rng, config.patches_per_class)
        losses = []
        for start in range(0, len(picks), config.batch_size):
            batch = picks[start : start + config.batch_size]
            batch_labels = labels[start : start + config.batch_size]
            level_batches = sampler.gather(batch)
            loss, grads = _forward_backward(level_batches, batch_labels, weights)
            if not np.isfinite(loss):
                raise NumericError(f"training diverged at epoch {epoch}")
            if lr > 0.0:
                _apply_sgd(weights, grads, lr)
            losses.append(loss)
        trace.append(float(np.mean(losses)))
    return weights, trace


def select_learn_rate(
    dataset,
    topology: TopologyConfig,
    config: TrainConfig,
    candidates: Sequence[float] = (1e-1, 1e-2, 1e-3, 1e-4),
    probe_epochs: int = 10,
) -> float:
    """Best learn rate by short mini-trainings (lowest final loss wins)."""
    best_rate, best_loss = None, np.inf
    for rate in candidates:
        cfg = TrainConfig(
            learn_rate=rate,
            epochs=probe_epochs,
            batch_size=config.batch_size,
            patches_per_class=config.patches_per_class,
            init_std=config.init_std,
            seed=config.seed,
        )
        try:
            _, trace = train(dataset, topology, cfg)
        except NumericError:
            continue
        if np.isfinite(trace[-1]) and trace[-1] < best_loss:
            best_rate, best_loss = rate, trace[-1]
    if best_rate is None:
        raise NumericError("every candidate learn rate diverged")
    return best_rate


def dense_accuracy(weights: NetWeights, dataset) -> float:
    """Pixel accuracy of dense inference against the aligned label crop."""
    correct = 0
    total = 0
    for image, labels in dataset:
        labels = np.asarray(labels)
        logits, off = dense_logits(image, weights)
        pred = logits.argmax(axis=0)
        sub = labels[off : off + pred.shape[0], off : off + pred.shape[1]]
        correct += int((pred == sub).sum())
        total += sub.size
    return correct / total if total else 0.0


def tune_biases_mcc(weights: NetWeights, validation) -> NetWeights:
    """Cyclic coordinate search on output biases maximizing validation MCC.

    Per-class offsets are searched over the grid -2.0 .. +2.0 in steps
    of 0.1, two sweeps, keeping a candidate only on strict improvement;
    the result never scores below the input weights.
    """
    if not len(validation):
        raise InvalidInputError("validation set is empty")
    topo = weights.topology
    logit_rows = []
    label_rows = []
    for image, labels in validation:
        labels = np.asarray(labels)
        logits, off = dense_logits(image, weights)
        k, h, w = logits.shape
        logit_rows.append(logits.reshape(k, h * w).T.astype(np.float64))
        label_rows.append(labels[off : off + h, off : off + w].ravel())
    all_logits = np.concatenate(logit_rows, axis=0)
    all_labels = np.concatenate(label_rows)

    def score(offsets):
        pred = (all_logits + offsets).argmax(axis=1)
        return mcc(accumulate(all_labels, pred, topo.n_classes))

    offsets = np.zeros(topo.n_classes)
    best = score(offsets)
    grid = np.round(np.arange(-2.0, 2.0 + 1e-9, 0.1), 10)
    for _ in range(2):
        for k in range(topo.n_classes):
            for value in grid:
                cand = offsets.copy()
                cand[k] = value
                s = score(cand)
                if s > best + 1e-12:
                    best = s
                    offsets = cand
    tuned = weights.copy()
    tuned.fc.b = (tuned.fc.b.astype(np.float64) + offsets).astype(tuned.fc.b.dtype)
    return tuned
