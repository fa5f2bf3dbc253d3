"""Class membership maps: per-pixel scene labels over the fixed class set."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidInputError
from .pgm import read_pgm, write_pgm

CLASS_NAMES = ("background", "road", "vehicle", "sky", "vru", "infrastructure")
N_CLASSES = len(CLASS_NAMES)

BACKGROUND, ROAD, VEHICLE, SKY, VRU, INFRASTRUCTURE = range(N_CLASSES)


@dataclass
class ClassMembershipMap:
    """Per-pixel class IDs, optionally backed by per-class probabilities.

    ``labels`` is (h, w) integer; ``probabilities``, when present, is
    (n_classes, h, w) with per-pixel sums of 1 and labels equal to the
    per-pixel argmax.
    """

    labels: np.ndarray
    probabilities: Optional[np.ndarray] = None

    def __post_init__(self):
        self.labels = np.asarray(self.labels)
        if self.labels.ndim != 2:
            raise InvalidInputError("labels must be 2D")
        if self.labels.size and (
            self.labels.min() < 0 or self.labels.max() >= N_CLASSES
        ):
            raise InvalidInputError(f"labels must lie in [0, {N_CLASSES - 1}]")
        if self.probabilities is not None:
            p = np.asarray(self.probabilities)
            if p.shape != (N_CLASSES,) + self.labels.shape:
                raise InvalidInputError("probabilities must be (n_classes, h, w)")
            sums = p.sum(axis=0)
            if p.size and (
                p.min() < -1e-5
                or np.abs(sums - 1.0).max() > 1e-5
                or np.any(self.labels != p.argmax(axis=0))
            ):
                raise InvalidInputError("probabilities inconsistent with labels")
            self.probabilities = p

    @property
    def shape(self):
        return self.labels.shape


def read_labels(path) -> ClassMembershipMap:
    img = read_pgm(path)
    if img.size and img.max() >= N_CLASSES:
        raise InvalidInputError(f"{path}: label values must be 0..{N_CLASSES - 1}")
    return ClassMembershipMap(img.astype(np.int64))


def write_labels(path, labels) -> None:
    if isinstance(labels, ClassMembershipMap):
        labels = labels.labels
    write_pgm(path, np.asarray(labels), maxval=N_CLASSES - 1, binary=True)
