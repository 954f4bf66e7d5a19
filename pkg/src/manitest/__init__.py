"""Invariance scores for image classifiers via geodesics on transformation manifolds."""

from .errors import (
    CorruptMap,
    DegenerateMetric,
    DimensionMismatch,
    EmptyClass,
    InvalidParams,
    ManitestError,
    OracleFailure,
    ZeroImage,
)
from .groups import GroupPoint, TransformGroup, make_group
from .image import Image, inner_product, interpolate, l2_norm, warp
from .metric import MetricField, MetricTensor, metric_tensor, tangent_images
from .fast_marching import (
    DistanceMap,
    Outcome,
    StopSignal,
    backtrace,
    edge_update,
    run,
    simplex_update,
    triangle_update,
)
from .scoring import (
    AugmentationPolicy,
    GlobalScore,
    InvarianceResult,
    ScoreConfig,
    augment,
    global_score,
    invariance_score,
)

__all__ = [name for name in dir() if not name.startswith("_")]
