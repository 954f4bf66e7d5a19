"""Pullback Riemannian metric on the group, estimated by finite differences.

At a group point tau, the i-th tangent image approximates the derivative
of the warped image with respect to parameter axis i.  The metric tensor
is the Gram matrix of the tangent images under the discrete L2 inner
product; its units are intensity^2 * pixel^2 per (axis unit)^2.

Differences use half a lattice step per axis (central where possible,
one-sided against the scale boundary).  Tensors are memoized per lattice
node for the lifetime of one front-propagation run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMetric, InvalidParams
from .groups import GroupPoint, TransformGroup
from .image import Image, _warp_stack, l2_norm

DEGENERATE_TRACE_FACTOR = 1e-12


@dataclass(frozen=True)
class MetricTensor:
    """Symmetric PSD p x p matrix of tangent-image inner products."""

    entries: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.entries, dtype=float))
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise InvalidParams(f"metric tensor must be square, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries))


def _tangent_arrays(img: Image, group: TransformGroup, at: GroupPoint) -> np.ndarray:
    """Finite-difference tangents as one (p, channels, h, w) array.

    All warps for a node are gathered in a single batched pass.
    """
    if not at.valid:
        raise InvalidParams(f"group point {at.lattice} is outside the group domain")
    base = tuple(group.natural(at.params))
    params = []
    plan = []  # (hi index, lo index or None for one-sided, step h)
    base_idx = None
    for i in range(group.dim):
        h = group.steps[i] / 2.0
        hi = list(base)
        lo = list(base)
        hi[i] += h
        lo[i] -= h
        params.append(tuple(hi))
        hi_idx = len(params) - 1
        if group.scale_axis == i and lo[i] <= 0.0:
            # one-sided difference against the scale boundary
            if base_idx is None:
                params.append(base)
                base_idx = len(params) - 1
            plan.append((hi_idx, None, h))
        else:
            params.append(tuple(lo))
            plan.append((hi_idx, len(params) - 1, h))
    warped = _warp_stack(img, group, params)
    out = np.empty((group.dim,) + img.samples.shape)
    for i, (hi_idx, lo_idx, h) in enumerate(plan):
        if lo_idx is None:
            out[i] = (warped[hi_idx] - warped[base_idx]) / h
        else:
            out[i] = (warped[hi_idx] - warped[lo_idx]) / (2.0 * h)
    return out


def tangent_images(img: Image, group: TransformGroup, at: GroupPoint) -> list[Image]:
    """Finite-difference tangent images, one per parameter axis."""
    return [Image(d) for d in _tangent_arrays(img, group, at)]


def metric_tensor(img: Image, group: TransformGroup, at: GroupPoint) -> MetricTensor:
    """Gram matrix of the tangent images, symmetrized and clamped to PSD."""
    tangents = _tangent_arrays(img, group, at)
    flat = tangents.reshape(group.dim, -1)
    G = flat @ flat.T
    G = (G + G.T) / 2.0
    eigvals = np.linalg.eigvalsh(G)
    if eigvals[0] < 0.0:
        w, V = np.linalg.eigh(G)
        G = (V * np.clip(w, 0.0, None)) @ V.T
        G = (G + G.T) / 2.0
    return MetricTensor(G)


class MetricField:
    """Node -> metric tensor map for one image, memoized per lattice node.

    Raises :class:`DegenerateMetric` when a tensor's trace does not exceed
    ``1e-12 * ||I||^2`` (so always for blank images): every move through
    such a node would be free and the resulting distances meaningless.
    """

    def __init__(self, img: Image, group: TransformGroup):
        self.img = img
        self.group = group
        self._norm_sq = l2_norm(img) ** 2
        self._cache: dict[tuple[int, ...], MetricTensor] = {}

    def __call__(self, at: GroupPoint) -> MetricTensor:
        cached = self._cache.get(at.lattice)
        if cached is None:
            cached = metric_tensor(self.img, self.group, at)
            self._cache[at.lattice] = cached
        if cached.trace <= DEGENERATE_TRACE_FACTOR * self._norm_sq:
            raise DegenerateMetric(
                f"metric trace {cached.trace:g} at node {at.lattice} is negligible "
                f"relative to the image norm"
            )
        return cached
