"""Per-image and dataset-level invariance scores, plus data augmentation.

The per-image score is the geodesic distance, on the lattice of group
elements, from the identity to the first frozen node whose warped image
the classifier labels differently from the original, divided by the
image's L2 norm.  The dataset score is the mean of per-image scores over
a seeded random subset, counting capped (exhausted) and degenerate runs
separately rather than folding them into the mean.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateMetric, ZeroImage
from .fast_marching import DEFAULT_MAX_ITERS, StopSignal, backtrace, run
from .groups import GroupPoint, TransformGroup, make_group
from .image import Image, l2_norm, warp
from .metric import MetricField


@dataclass(frozen=True)
class ScoreConfig:
    max_iters: int = DEFAULT_MAX_ITERS


@dataclass
class InvarianceResult:
    outcome: str  # 'hit' | 'exhausted' | 'degenerate'
    delta: Optional[float] = None
    flip_node: Optional[GroupPoint] = None
    flip_label: Optional[int] = None
    original_label: Optional[int] = None
    path: Optional[list] = None
    visited: int = 0


def invariance_score(img: Image, group: TransformGroup, oracle,
                     config: ScoreConfig = ScoreConfig()) -> InvarianceResult:
    """Minimal normalized flipping distance for one image.

    Raises :class:`ZeroImage` for blank inputs and propagates
    :class:`DegenerateMetric` / :class:`OracleFailure` from the run.
    """
    norm = l2_norm(img)
    if norm == 0.0:
        raise ZeroImage("cannot normalize the score of an all-zero image")
    original = oracle.classify(img)
    label_cache: dict[tuple, int] = {}

    def stop(point: GroupPoint) -> StopSignal:
        label = label_cache.get(point.lattice)
        if label is None:
            label = oracle.classify(warp(img, group, group.natural(point.params)))
            label_cache[point.lattice] = label
        return StopSignal(halt=label != original, label=label)

    field_ = MetricField(img, group)
    dmap, outcome = run(group, field_, stop=stop, max_iters=config.max_iters)
    if outcome.kind != "hit":
        return InvarianceResult(outcome="exhausted", original_label=original,
                                visited=outcome.pops)
    flip = outcome.node
    return InvarianceResult(
        outcome="hit",
        delta=outcome.distance / norm,
        flip_node=flip,
        flip_label=label_cache[flip.lattice],
        original_label=original,
        path=backtrace(dmap, flip.lattice),
        visited=outcome.pops,
    )


@dataclass
class GlobalScore:
    mean_delta: Optional[float]
    std_delta: Optional[float]
    hits: int
    exhausted: int
    degenerate: int
    results: list = field(default_factory=list)  # (dataset index, InvarianceResult)


def global_score(dataset, group: TransformGroup, oracle_factory,
                 config: ScoreConfig = ScoreConfig(), sample_size: Optional[int] = None,
                 seed: int = 0, jobs: int = 1) -> GlobalScore:
    """Mean invariance score over a seeded random subset of ``dataset``.

    ``oracle_factory`` is a zero-argument callable producing a classifier
    oracle; with ``jobs > 1`` each worker thread owns its own oracle.
    Degenerate and capped runs are excluded from the mean and counted.
    """
    n = len(dataset)
    if sample_size is None:
        sample_size = n
    if not 1 <= sample_size <= n:
        raise ValueError(f"sample size {sample_size} out of range for {n} images")
    rng = np.random.default_rng(seed)
    indices = sorted(rng.permutation(n)[:sample_size].tolist())

    local = threading.local()

    def score_one(idx):
        oracle = getattr(local, "oracle", None)
        if oracle is None:
            oracle = local.oracle = oracle_factory()
        try:
            return idx, invariance_score(dataset[idx], group, oracle, config)
        except (DegenerateMetric, ZeroImage):
            return idx, InvarianceResult(outcome="degenerate")

    if jobs <= 1:
        results = [score_one(i) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(score_one, indices))
    results.sort(key=lambda pair: pair[0])

    deltas = [r.delta for _, r in results if r.outcome == "hit"]
    return GlobalScore(
        mean_delta=float(np.mean(deltas)) if deltas else None,
        std_delta=float(np.std(deltas)) if deltas else None,
        hits=len(deltas),
        exhausted=sum(1 for _, r in results if r.outcome == "exhausted"),
        degenerate=sum(1 for _, r in results if r.outcome == "degenerate"),
        results=results,
    )


@dataclass(frozen=True)
class AugmentationPolicy:
    """Bounds for random similarity transformations of training images."""

    max_translation: float = 3.0
    scale_range: tuple = (0.7, 1.3)
    max_rotation: float = 0.2
    count: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.scale_range[0] <= 0 or self.scale_range[1] < self.scale_range[0]:
            raise ValueError(f"bad scale range {self.scale_range}")
        if self.max_translation < 0 or self.max_rotation < 0 or self.count < 0:
            raise ValueError("augmentation bounds must be non-negative")


def sample_transform(policy: AugmentationPolicy, rng) -> tuple:
    """Draw natural similarity parameters (a, theta, tx, ty) within bounds."""
    a = rng.uniform(policy.scale_range[0], policy.scale_range[1])
    theta = rng.uniform(-policy.max_rotation, policy.max_rotation)
    tx = rng.uniform(-policy.max_translation, policy.max_translation)
    ty = rng.uniform(-policy.max_translation, policy.max_translation)
    return (a, theta, tx, ty)


def augment(dataset, policy: AugmentationPolicy):
    """Append ``count`` randomly warped copies per original, labels kept."""
    sim = make_group("sim")
    rng = np.random.default_rng(policy.seed)
    out = list(dataset)
    for img, label in dataset:
        for _ in range(policy.count):
            params = sample_transform(policy, rng)
            out.append((warp(img, sim, params), label))
    return out
