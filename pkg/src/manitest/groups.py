"""Transformation groups acting on the plane, with lattice discretization.

Four groups are supported, identified by a short token:

==========  ===  =====================================================
token       p    parameter axes (in order)
==========  ===  =====================================================
``rot``     1    rotation angle (radians)
``trans``   2    translation x, translation y (pixels)
``dilrot``  2    dilation offset, rotation angle
``sim``     4    dilation offset, rotation angle, translation x, y
==========  ===  =====================================================

Two parameter conventions coexist:

* *offset* parameters: the identity is the all-zero vector and, on a
  lattice, ``params = lattice * steps`` axis-wise.  The dilation axis
  holds the offset from scale 1.
* *natural* parameters: what the geometry actually uses -- the dilation
  axis holds the scale factor ``a = 1 + offset``.  ``apply`` and
  ``invert`` take natural parameters.

Positive rotation angles are counter-clockwise in the mathematical frame
(x right, y up); since image rows grow downward, the on-screen rotation
appears clockwise.  A similarity scales first, then rotates about the
origin, then translates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParams

KINDS = ("rot", "trans", "dilrot", "sim")

_DEFAULT_STEPS = {
    "rot": (math.pi / 20,),
    "trans": (0.5, 0.5),
    "dilrot": (0.1, math.pi / 20),
    "sim": (0.1, math.pi / 20, 0.5, 0.5),
}

# index of the dilation axis in the parameter vector, or None
_SCALE_AXIS = {"rot": None, "trans": None, "dilrot": 0, "sim": 0}


@dataclass(frozen=True)
class GroupPoint:
    """A node of the group lattice.

    ``params`` are offset parameters: exactly ``lattice * steps`` axis-wise.
    ``valid`` is False when the node falls outside the group's domain
    (scale factor <= 0); such nodes are skipped by the front propagation,
    never raised on.
    """

    lattice: tuple[int, ...]
    params: tuple[float, ...]
    valid: bool


@dataclass(frozen=True)
class TransformGroup:
    kind: str
    steps: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParams(f"unknown group kind {self.kind!r}")
        if len(self.steps) != self.dim:
            raise InvalidParams(
                f"group {self.kind!r} needs {self.dim} steps, got {len(self.steps)}"
            )
        if any(s <= 0 for s in self.steps):
            raise InvalidParams("lattice steps must be positive")

    @property
    def dim(self) -> int:
        return len(_DEFAULT_STEPS[self.kind])

    @property
    def scale_axis(self):
        return _SCALE_AXIS[self.kind]

    @property
    def identity(self) -> tuple[float, ...]:
        """Natural parameters of the identity element."""
        nat = [0.0] * self.dim
        if self.scale_axis is not None:
            nat[self.scale_axis] = 1.0
        return tuple(nat)

    # -- parameter plumbing -------------------------------------------------

    def natural(self, offset_params) -> tuple[float, ...]:
        """Convert offset parameters to natural ones (scale axis += 1)."""
        nat = list(map(float, offset_params))
        if self.scale_axis is not None:
            nat[self.scale_axis] += 1.0
        return tuple(nat)

    def point_from_lattice(self, lattice) -> GroupPoint:
        lattice = tuple(int(k) for k in lattice)
        if len(lattice) != self.dim:
            raise InvalidParams(f"lattice point has wrong dimension {len(lattice)}")
        params = tuple(k * s for k, s in zip(lattice, self.steps))
        valid = True
        if self.scale_axis is not None and 1.0 + params[self.scale_axis] <= 0.0:
            valid = False
        return GroupPoint(lattice, params, valid)

    def _check_natural(self, params):
        params = tuple(map(float, params))
        if len(params) != self.dim:
            raise InvalidParams(f"expected {self.dim} parameters, got {len(params)}")
        if self.scale_axis is not None and params[self.scale_axis] <= 0.0:
            raise InvalidParams(f"scale factor must be positive, got {params[self.scale_axis]}")
        return params

    def _affine(self, params):
        """Return (A, b) with tau(x) = A @ x + b, for natural params."""
        if self.kind == "trans":
            return np.eye(2), np.asarray(params, dtype=float)
        if self.kind == "rot":
            (theta,) = params
            a = 1.0
            tx = ty = 0.0
        elif self.kind == "dilrot":
            a, theta = params
            tx = ty = 0.0
        else:  # sim
            a, theta, tx, ty = params
        c, s = math.cos(theta), math.sin(theta)
        A = np.array([[a * c, -a * s], [a * s, a * c]])
        return A, np.array([tx, ty])

    # -- group action -------------------------------------------------------

    def apply(self, params, point):
        """Apply the transformation with natural ``params`` to a point (x, y)."""
        params = self._check_natural(params)
        A, b = self._affine(params)
        return tuple(A @ np.asarray(point, dtype=float) + b)

    def apply_many(self, params, xs, ys):
        """Vectorized ``apply`` over coordinate arrays; returns (xs', ys')."""
        params = self._check_natural(params)
        A, b = self._affine(params)
        xo = A[0, 0] * xs + A[0, 1] * ys + b[0]
        yo = A[1, 0] * xs + A[1, 1] * ys + b[1]
        return xo, yo

    def invert(self, params) -> tuple[float, ...]:
        """Natural parameters of the inverse transformation."""
        params = self._check_natural(params)
        if self.kind == "trans":
            return (-params[0], -params[1])
        if self.kind == "rot":
            return (-params[0],)
        if self.kind == "dilrot":
            a, theta = params
            return (1.0 / a, -theta)
        a, theta, tx, ty = params
        c, s = math.cos(-theta), math.sin(-theta)
        # inverse of x -> a R t x + t is x -> (1/a) R(-t) (x - t)
        itx = -(c * tx - s * ty) / a
        ity = -(s * tx + c * ty) / a
        return (1.0 / a, -theta, itx, ity)


def make_group(kind: str, steps=None) -> TransformGroup:
    """Build a group from its CLI token, with the standard default steps."""
    if kind not in KINDS:
        raise InvalidParams(f"unknown group kind {kind!r} (expected one of {KINDS})")
    if steps is None:
        steps = _DEFAULT_STEPS[kind]
    return TransformGroup(kind, tuple(float(s) for s in steps))
