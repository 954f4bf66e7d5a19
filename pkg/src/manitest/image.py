"""Images as sampled intensity grids, with warping and discrete L2 geometry.

Pixels live on an integer grid; geometric transformations act in a
*centered* frame whose origin sits at ``((width-1)/2, (height-1)/2)``
with the y axis pointing down (row direction).  Anything sampled outside
the grid reads as zero.  Warping uses bilinear interpolation; the pixel
cell area is 1, so norms and inner products are plain sums over samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidParams
from .groups import TransformGroup


@dataclass(frozen=True)
class Image:
    """An immutable stack of one or more channels sharing dimensions.

    ``samples`` has shape (channels, height, width), float64, read-only.
    """

    samples: np.ndarray = field()

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim == 2:
            arr = arr[None, :, :]
        if arr.ndim != 3:
            raise InvalidParams(f"image array must be 2-D or 3-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidParams("image samples must be finite")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def height(self) -> int:
        return self.samples.shape[1]

    @property
    def width(self) -> int:
        return self.samples.shape[2]

    @property
    def center(self) -> tuple[float, float]:
        return ((self.width - 1) / 2.0, (self.height - 1) / 2.0)


def _sample_bilinear(plane: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Bilinear lookup on one channel with zero padding outside the grid.

    Coordinates are clipped to one cell past the grid, where a ring of
    explicit zero padding makes the out-of-grid value exactly zero without
    per-corner masking.
    """
    h, w = plane.shape
    padded = np.pad(plane, ((1, 2), (1, 2)))
    xs = np.clip(xs, -1.0, float(w))
    ys = np.clip(ys, -1.0, float(h))
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    fx = xs - x0
    fy = ys - y0
    i00 = padded[y0 + 1, x0 + 1]
    i01 = padded[y0 + 1, x0 + 2]
    i10 = padded[y0 + 2, x0 + 1]
    i11 = padded[y0 + 2, x0 + 2]
    top = i00 + fx * (i01 - i00)
    bottom = i10 + fx * (i11 - i10)
    return top + fy * (bottom - top)


_GRID_CACHE: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}


def _centered_grid(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """Centered-frame coordinates of every pixel, cached per image size."""
    got = _GRID_CACHE.get((width, height))
    if got is None:
        xs, ys = np.meshgrid(
            np.arange(width, dtype=float) - (width - 1) / 2.0,
            np.arange(height, dtype=float) - (height - 1) / 2.0,
        )
        xs.setflags(write=False)
        ys.setflags(write=False)
        got = _GRID_CACHE[(width, height)] = (xs, ys)
    return got


def interpolate(img: Image, x: float, y: float):
    """Bilinear interpolation at a real coordinate; zero outside the grid.

    Returns a float for single-channel images, else one value per channel.
    """
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    vals = np.stack([_sample_bilinear(ch, xs, ys) for ch in img.samples])
    if img.channels == 1:
        return float(vals[0])
    return vals


def warp(img: Image, group: TransformGroup, params) -> Image:
    """Warp by a group element: output(x, y) = input(tau^-1(x, y)).

    ``params`` are natural parameters (scale axis carries the scale
    factor).  Output dimensions equal the input's; coordinates are mapped
    through the centered frame and missing data reads as zero.
    """
    inv = group.invert(params)
    cx, cy = img.center
    xs, ys = _centered_grid(img.width, img.height)
    sx, sy = group.apply_many(inv, xs, ys)
    sx = sx + cx
    sy = sy + cy
    out = np.stack([_sample_bilinear(ch, sx, sy) for ch in img.samples])
    return Image(out)


def _warp_stack(img: Image, group: TransformGroup, params_list) -> np.ndarray:
    """Warped sample arrays for several group elements in one gather.

    Returns shape (len(params_list), channels, height, width); equivalent
    to warping each element separately but with shared indexing work.
    """
    xs, ys = _centered_grid(img.width, img.height)
    cx, cy = img.center
    sx = np.empty((len(params_list),) + xs.shape)
    sy = np.empty_like(sx)
    for n, params in enumerate(params_list):
        gx, gy = group.apply_many(group.invert(params), xs, ys)
        sx[n] = gx + cx
        sy[n] = gy + cy
    return np.stack([_sample_bilinear(ch, sx, sy) for ch in img.samples], axis=1)


def l2_norm(img: Image) -> float:
    """Discrete L2 norm: sqrt of the sum of squared samples (cell area 1)."""
    return float(np.sqrt(np.sum(np.square(img.samples))))


def inner_product(a: Image, b: Image) -> float:
    """Discrete L2 inner product, summed over all channels."""
    if a.samples.shape != b.samples.shape:
        raise DimensionMismatch(
            f"image shapes differ: {a.samples.shape} vs {b.samples.shape}"
        )
    return float(np.sum(a.samples * b.samples))
