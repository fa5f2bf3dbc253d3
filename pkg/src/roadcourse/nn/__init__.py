"""Compact multi-scale convolutional labeling network.

The network classifies every pixel of a camera image into the scene
classes of :mod:`roadcourse.labeling`. An image pyramid feeds one
branch per scale; each branch alternates valid-convolution blocks with
2x2 max pooling. Dense whole-image inference keeps full resolution by
pooling in an overlapping fashion and fragmenting the oversized feature
maps into independently subsampled arrays; patch inference runs the same
arithmetic with stride-2 pooling on receptive-field-sized windows. Both
paths produce identical probabilities, which is the property the test
suite pins down.
"""

from .topology import TopologyConfig, parse_topology
from .network import (
    FeatureMapArray,
    NetWeights,
    build_pyramid,
    defragment,
    dense_logits,
    extract_patch_windows,
    forward_dense,
    forward_patch,
    forward_patch_batch,
    fragment_array,
    init_weights,
    local_normalize,
)
from .training import TrainConfig, dense_accuracy, select_learn_rate, train, tune_biases_mcc
from .weights_io import load_weights, save_weights

__all__ = [
    "TopologyConfig",
    "parse_topology",
    "FeatureMapArray",
    "NetWeights",
    "build_pyramid",
    "defragment",
    "dense_logits",
    "extract_patch_windows",
    "forward_dense",
    "forward_patch",
    "forward_patch_batch",
    "fragment_array",
    "init_weights",
    "local_normalize",
    "TrainConfig",
    "dense_accuracy",
    "select_learn_rate",
    "train",
    "tune_biases_mcc",
    "load_weights",
    "save_weights",
]
