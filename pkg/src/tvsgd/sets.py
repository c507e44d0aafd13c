"""Convex feasible sets with exact Euclidean projections."""

from dataclasses import dataclass

import numpy as np


def _as_vector(value, name):
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a scalar or 1-d array")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FeasibleBox:
    """Axis-aligned box ``{x : lo <= x <= hi}``.

    Scalars are promoted to 1-d arrays. ``lo == hi`` is allowed (a single point).
    """

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = _as_vector(self.lo, "lo")
        hi = _as_vector(self.hi, "hi")
        lo, hi = np.broadcast_arrays(lo, hi)
        if np.any(lo > hi):
            raise ValueError(f"degenerate box: lo {lo} exceeds hi {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def project(self, x):
        """Coordinatewise clamp; broadcasts over leading axes of ``x``."""
        return np.clip(x, self.lo, self.hi)

    def contains(self, x, tol: float = 0.0):
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lo - tol) & (x <= self.hi + tol), axis=-1)

    def __eq__(self, other):
        if not isinstance(other, FeasibleBox):
            return NotImplemented
        return np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __hash__(self):
        return hash((self.lo.tobytes(), self.hi.tobytes()))

    def __repr__(self):
        return f"FeasibleBox(lo={self.lo.tolist()}, hi={self.hi.tolist()})"


@dataclass(frozen=True, eq=False)
class EuclideanBall:
    """Closed ball ``{x : ||x - center|| <= radius}``."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _as_vector(self.center, "center"))
        if not (np.isfinite(self.radius) and self.radius >= 0):
            raise ValueError(f"radius must be finite and nonnegative, got {self.radius}")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def project(self, x):
        """Radial rescale onto the ball; broadcasts over leading axes of ``x``."""
        x = np.asarray(x, dtype=float)
        offset = x - self.center
        norm = np.linalg.norm(offset, axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(norm > self.radius, self.radius / norm, 1.0)
        return self.center + offset * scale

    def contains(self, x, tol: float = 0.0):
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - self.center, axis=-1) <= self.radius + tol

    def __eq__(self, other):
        if not isinstance(other, EuclideanBall):
            return NotImplemented
        return np.array_equal(self.center, other.center) and self.radius == other.radius

    def __hash__(self):
        return hash((self.center.tobytes(), self.radius))

    def __repr__(self):
        return f"EuclideanBall(center={self.center.tolist()}, radius={self.radius})"
