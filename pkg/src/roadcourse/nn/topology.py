"""Topology descriptor for the multi-scale labeling network."""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import ConfigError
from ..labeling import N_CLASSES

# the two supported conv-block variants: (conv layers per block, kernel size)
_CONV_VARIANTS = {(1, 7), (3, 3)}
_KC_FOR_NC = {1: 7, 3: 3}


@dataclass(frozen=True)
class TopologyConfig:
    """Structural parameters of one network.

    n_l pyramid levels feed n_l structurally identical branches (weights
    are not shared). A branch alternates n_b = n_p + 1 convolution
    blocks with n_p pooling layers; each block stacks n_c valid
    convolutions of kernel k_c, and the filter count n_f doubles after
    every pooling layer. Pooling is always 2x2: stride 1 plus
    fragmentation in dense mode, stride 2 in patch mode.
    """

    n_l: int = 3
    n_p: int = 2
    n_c: int = 1
    k_c: int = 7
    n_f: int = 16
    n_classes: int = N_CLASSES

    def __post_init__(self):
        if self.n_l < 1:
            raise ConfigError("n_l must be >= 1")
        if not 0 <= self.n_p <= 3:
            raise ConfigError("n_p must be in 0..3")
        if (self.n_c, self.k_c) not in _CONV_VARIANTS:
            raise ConfigError(f"(n_c, k_c) must be one of {sorted(_CONV_VARIANTS)}")
        if self.n_f < 1:
            raise ConfigError("n_f must be >= 1")
        if self.n_classes < 2:
            raise ConfigError("n_classes must be >= 2")

    @property
    def n_b(self) -> int:
        """Number of convolution blocks."""
        return self.n_p + 1

    def filters(self, block: int) -> int:
        """Filter count of block b: n_f doubled after each pooling layer."""
        return self.n_f * (1 << block)

    @property
    def filter_counts(self) -> tuple:
        return tuple(self.filters(b) for b in range(self.n_b))

    @property
    def name(self) -> str:
        return f"mssn-{self.n_l}-{self.n_c}-{self.n_f}"

    @property
    def receptive_field(self) -> int:
        """Patch edge length that reduces to a single output pixel."""
        size = 1
        for block in reversed(range(self.n_b)):
            size += self.n_c * (self.k_c - 1)
            if block > 0:
                size *= 2
        return size

    @property
    def label_offset(self) -> int:
        """Input pixel classified by dense-output pixel p is p + label_offset."""
        return self.receptive_field // 2

    @property
    def min_input_size(self) -> int:
        """Smallest square input whose coarsest level still fits one patch."""
        return self.receptive_field * (1 << (self.n_l - 1))

    def branch_channels(self) -> int:
        """Output channels of one branch (the last block's filter count)."""
        return self.filters(self.n_b - 1)

    def fc_input_channels(self) -> int:
        return self.n_l * self.branch_channels()

    def conv_shapes(self) -> list:
        """(out_ch, in_ch) of each conv layer of one branch, in order."""
        shapes = []
        in_ch = 1
        for block in range(self.n_b):
            out_ch = self.filters(block)
            for _ in range(self.n_c):
                shapes.append((out_ch, in_ch))
                in_ch = out_ch
        return shapes

    def parameter_count(self) -> int:
        per_branch = sum(
            o * i * self.k_c * self.k_c + o for o, i in self.conv_shapes()
        )
        fc = self.n_classes * self.fc_input_channels() + self.n_classes
        return self.n_l * per_branch + fc


def parse_topology(name: str, n_p: int = 2, n_classes: int = N_CLASSES) -> TopologyConfig:
    """Parse a topology name "mssn-<n_l>-<n_c>-<n_f>".

    The name does not encode the pooling depth, so n_p is taken as an
    argument (default 2).
    """
    m = re.fullmatch(r"mssn-(\d+)-(\d+)-(\d+)", name.strip())
    if not m:
        raise ConfigError(f"malformed topology name {name!r}")
    n_l, n_c, n_f = (int(g) for g in m.groups())
    if n_c not in _KC_FOR_NC:
        raise ConfigError(f"unsupported conv-layer count {n_c} in {name!r}")
    return TopologyConfig(
        n_l=n_l, n_p=n_p, n_c=n_c, k_c=_KC_FOR_NC[n_c], n_f=n_f, n_classes=n_classes
    )
