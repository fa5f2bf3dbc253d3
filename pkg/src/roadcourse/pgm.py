"""Plain PGM (P2 ascii / P5 binary) reading and writing."""

from __future__ import annotations

import numpy as np

from .errors import DataError


def write_pgm(path, image: np.ndarray, maxval: int = 255, binary: bool = True) -> None:
    img = np.asarray(image)
    if img.ndim != 2:
        raise DataError("PGM image must be 2D")
    if img.min() < 0 or img.max() > maxval:
        raise DataError(f"pixel values exceed maxval {maxval}")
    h, w = img.shape
    if binary:
        with open(path, "wb") as fh:
            fh.write(f"P5\n{w} {h}\n{maxval}\n".encode("ascii"))
            fh.write(img.astype(np.uint8).tobytes())
    else:
        with open(path, "w") as fh:
            fh.write(f"P2\n{w} {h}\n{maxval}\n")
            for row in img:
                fh.write(" ".join(str(int(v)) for v in row) + "\n")


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] not in (b"P2", b"P5"):
        raise DataError(f"{path}: not a PGM file")
    binary = data[:2] == b"P5"

    # header: magic, width, height, maxval; '#' comments allowed
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise DataError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos])
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise DataError(f"{path}: bad PGM header") from exc
    if maxval <= 0 or maxval > 255:
        raise DataError(f"{path}: unsupported maxval {maxval}")

    if binary:
        pos += 1  # single whitespace after maxval
        raster = data[pos : pos + w * h]
        if len(raster) != w * h:
            raise DataError(f"{path}: truncated PGM raster")
        img = np.frombuffer(raster, dtype=np.uint8)
    else:
        values = data[pos:].split()
        if len(values) != w * h:
            raise DataError(f"{path}: expected {w * h} pixels, got {len(values)}")
        img = np.array([int(v) for v in values], dtype=np.uint8)
    if img.size and img.max() > maxval:
        raise DataError(f"{path}: pixel value exceeds maxval")
    return img.reshape(h, w)
