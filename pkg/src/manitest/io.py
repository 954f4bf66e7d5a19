"""Loaders for PGM (P5) images and IDX ubyte tensors, plus small writers.

Intensities are scaled to [0, 1] on load.  IDX files follow the MNIST
convention: big-endian magic 0x00000803 for image sets and 0x00000801
for label vectors, with labels and images paired by index.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import ManitestError
from .image import Image

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


def load_pgm(path: str) -> Image:
    """Read a binary PGM (P5, maxval <= 255), scaled to [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    fields = []
    pos = 0
    # header = 4 whitespace-separated tokens, '#' comments allowed
    while len(fields) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ManitestError(f"{path}: truncated PGM header")
        fields.append(data[start:pos])
    pos += 1  # single whitespace byte after maxval
    if fields[0] != b"P5":
        raise ManitestError(f"{path}: not a binary PGM (magic {fields[0]!r})")
    width, height, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    if not 0 < maxval <= 255:
        raise ManitestError(f"{path}: unsupported maxval {maxval}")
    n = width * height
    raw = np.frombuffer(data, dtype=np.uint8, count=n, offset=pos)
    if raw.size != n:
        raise ManitestError(f"{path}: truncated PGM payload")
    return Image(raw.reshape(height, width).astype(float) / maxval)


def save_pgm(path: str, img: Image) -> None:
    if img.channels != 1:
        raise ManitestError("PGM output supports single-channel images only")
    arr = np.clip(np.round(img.samples[0] * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.width} {img.height}\n255\n".encode())
        fh.write(arr.tobytes())


def load_idx_images(path: str) -> list[Image]:
    """Read an IDX image tensor (magic 0x803) into a list of images."""
    with open(path, "rb") as fh:
        head = fh.read(16)
        if len(head) != 16:
            raise ManitestError(f"{path}: truncated IDX header")
        magic, count, rows, cols = struct.unpack(">IIII", head)
        if magic != IDX_IMAGES_MAGIC:
            raise ManitestError(f"{path}: bad IDX image magic {magic:#010x}")
        raw = np.frombuffer(fh.read(), dtype=np.uint8)
    if raw.size != count * rows * cols:
        raise ManitestError(f"{path}: IDX payload size mismatch")
    tensor = raw.reshape(count, rows, cols).astype(float) / 255.0
    return [Image(tensor[i]) for i in range(count)]


def load_idx_labels(path: str) -> list[int]:
    """Read an IDX label vector (magic 0x801)."""
    with open(path, "rb") as fh:
        head = fh.read(8)
        if len(head) != 8:
            raise ManitestError(f"{path}: truncated IDX header")
        magic, count = struct.unpack(">II", head)
        if magic != IDX_LABELS_MAGIC:
            raise ManitestError(f"{path}: bad IDX label magic {magic:#010x}")
        raw = np.frombuffer(fh.read(), dtype=np.uint8)
    if raw.size != count:
        raise ManitestError(f"{path}: IDX payload size mismatch")
    return [int(v) for v in raw]


def save_idx_images(path: str, images: list[Image]) -> None:
    rows, cols = images[0].height, images[0].width
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, len(images), rows, cols))
        for img in images:
            arr = np.clip(np.round(img.samples[0] * 255.0), 0, 255).astype(np.uint8)
            fh.write(arr.tobytes())


def save_idx_labels(path: str, labels: list[int]) -> None:
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, len(labels)))
        fh.write(bytes(int(v) for v in labels))


def load_image(path: str) -> Image:
    """Dispatch on extension/magic: .pgm -> PGM, otherwise try IDX (first image)."""
    if path.endswith(".pgm"):
        return load_pgm(path)
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"P5":
        return load_pgm(path)
    return load_idx_images(path)[0]
