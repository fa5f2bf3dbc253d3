"""Binary weight file: magic "MSSN", u32 version, topology header, then
little-endian float32 payload per layer in declaration order (per level:
conv weights then biases; finally the 1x1 output layer)."""

from __future__ import annotations

import struct

import numpy as np

from ..errors import DataError
from .network import LayerWeights, NetWeights
from .topology import TopologyConfig

_MAGIC = b"MSSN"
_VERSION = 1
# header: n_l, n_p, n_c, k_c, n_f, n_classes, reserved
_HEADER = struct.Struct("<4sI7I")


def save_weights(path, weights: NetWeights) -> None:
    topo = weights.topology
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(
                _MAGIC,
                _VERSION,
                topo.n_l,
                topo.n_p,
                topo.n_c,
                topo.k_c,
                topo.n_f,
                topo.n_classes,
                0,
            )
        )
        for branch in weights.branches:
            for lw in branch:
                fh.write(np.ascontiguousarray(lw.w, dtype="<f4").tobytes())
                fh.write(np.ascontiguousarray(lw.b, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(weights.fc.w, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(weights.fc.b, dtype="<f4").tobytes())


def load_weights(path) -> NetWeights:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise DataError(f"{path}: truncated header")
        magic, version, n_l, n_p, n_c, k_c, n_f, n_classes, _ = _HEADER.unpack(header)
        if magic != _MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}")
        if version != _VERSION:
            raise DataError(f"{path}: unsupported version {version}")
        try:
            topo = TopologyConfig(
                n_l=n_l, n_p=n_p, n_c=n_c, k_c=k_c, n_f=n_f, n_classes=n_classes
            )
        except Exception as exc:
            raise DataError(f"{path}: invalid topology header: {exc}") from exc
        payload = fh.read()

    def take(count, shape):
        nonlocal offset
        nbytes = count * 4
        if offset + nbytes > len(payload):
            raise DataError(f"{path}: truncated weight payload")
        arr = np.frombuffer(payload, dtype="<f4", count=count, offset=offset)
        offset += nbytes
        return arr.reshape(shape).copy()

    offset = 0
    branches = []
    for _ in range(topo.n_l):
        layers = []
        for out_ch, in_ch in topo.conv_shapes():
            w = take(out_ch * in_ch * k_c * k_c, (out_ch, in_ch, k_c, k_c))
            b = take(out_ch, (out_ch,))
            layers.append(LayerWeights(w, b))
        branches.append(layers)
    fc_w = take(n_classes * topo.fc_input_channels(), (n_classes, topo.fc_input_channels(), 1, 1))
    fc_b = take(n_classes, (n_classes,))
    if offset != len(payload):
        raise DataError(f"{path}: {len(payload) - offset} trailing bytes")
    return NetWeights(topo, branches, LayerWeights(fc_w, fc_b))
