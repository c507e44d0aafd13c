"""Closed-form tracking-error bounds for constant step-size SGD.

Notation: ``ell`` is the uniform strong-concavity constant of ``ln p(x|.)``
(the smallest eigenvalue of the Hessian of ``-ln p``), ``lip`` the uniform
Lipschitz constant of the score, ``k`` the per-step drift bound of the true
parameter and ``d`` the parameter dimension.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np


class NoContractionError(ValueError):
    """Raised when the step size gives a contraction factor of at least one."""


class AlphaVerdict(str, Enum):
    ADMISSIBLE = "admissible"
    BELOW_RANGE = "below_range"
    AT_OR_ABOVE_UPPER = "at_or_above_upper"


@dataclass(frozen=True)
class ConvexityConstants:
    """Curvature bounds ``0 < ell <= lip`` of the negative log-likelihood."""

    ell: float
    lip: float

    def __post_init__(self):
        ell, lip = float(self.ell), float(self.lip)
        if not (np.isfinite(ell) and np.isfinite(lip)):
            raise ValueError("convexity constants must be finite")
        if not 0 < ell <= lip:
            raise ValueError(f"need 0 < ell <= lip, got ell={ell}, lip={lip}")
        object.__setattr__(self, "ell", ell)
        object.__setattr__(self, "lip", lip)

    @property
    def c1(self) -> float:
        """``ell * lip / (ell + lip)``, the co-coercivity weight on the iterate gap."""
        return self.ell * self.lip / (self.ell + self.lip)

    @property
    def c2(self) -> float:
        """``1 / (ell + lip)``, the co-coercivity weight on the gradient gap."""
        return 1.0 / (self.ell + self.lip)

    @property
    def optimal_alpha(self) -> float:
        return 1.0 / (self.ell + self.lip)

    def phi(self, alpha: float) -> float:
        return phi(alpha, self.lip)


@dataclass(frozen=True)
class BoundInputs:
    cc: ConvexityConstants
    k: float
    d: int
    alpha: float

    def __post_init__(self):
        if self.k < 0:
            raise ValueError(f"drift bound k must be nonnegative, got {self.k}")
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"dimension d must be a positive integer, got {self.d}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    @property
    def c1(self) -> float:
        return self.cc.c1

    @property
    def c2(self) -> float:
        return self.cc.c2

    @property
    def phi(self) -> float:
        return phi(self.alpha, self.cc.lip)

    @property
    def verdict(self) -> AlphaVerdict:
        return validate_alpha(self.alpha, self.cc)


def phi(alpha, lip):
    """Per-step L2 contraction factor ``sqrt(1 - 2 L a + 2 L^2 a^2)``.

    The quadratic under the root is bounded below by 1/2, so no domain check is
    needed. Works elementwise on arrays.
    """
    la = np.asarray(lip) * np.asarray(alpha)
    out = np.sqrt(1.0 - 2.0 * la + 2.0 * la * la)
    return float(out) if np.ndim(out) == 0 else out


def validate_alpha(alpha: float, cc: ConvexityConstants, rtol: float = 1e-12) -> AlphaVerdict:
    """Classify ``alpha`` against the admissible range ``[1/(ell+L), 1/L)``.

    The lower endpoint is matched with relative tolerance ``rtol`` so that a
    value computed as ``1/(ell+L)`` elsewhere is never misclassified.
    """
    lower = cc.optimal_alpha
    if alpha >= 1.0 / cc.lip:
        return AlphaVerdict.AT_OR_ABOVE_UPPER
    if alpha < lower * (1.0 - rtol):
        return AlphaVerdict.BELOW_RANGE
    return AlphaVerdict.ADMISSIBLE


def asymptotic_bound(inp: BoundInputs) -> float:
    """Limsup bound ``(phi K + alpha sqrt(2 d L)) / (1 - phi)`` on the L2 tracking error."""
    f = inp.phi
    if f >= 1.0:
        raise NoContractionError(
            f"no contraction at this step size: phi({inp.alpha}, {inp.cc.lip}) = {f}"
        )
    return (f * inp.k + inp.alpha * np.sqrt(2.0 * inp.d * inp.cc.lip)) / (1.0 - f)


def optimal_bound(cc: ConvexityConstants, k: float, d: int) -> float:
    """The limsup bound evaluated at its minimiser ``alpha = 1/(ell+L)``."""
    ell, lip = cc.ell, cc.lip
    root = np.hypot(ell, lip)
    return (k * root + np.sqrt(2.0 * d * lip)) / (ell + lip - root)


def comparison_margin(ell, lip, k):
    """Optimal bound (d = 1) minus ``sqrt(ell)``.

    ``sqrt(ell)`` is the smallest possible RMSE of the one-observation
    sufficient-statistic estimator, so a negative margin means the tracker's
    asymptotic error bound beats that estimator for every admissible truth.
    Broadcasts over array arguments.
    """
    ell = np.asarray(ell, dtype=float)
    lip = np.asarray(lip, dtype=float)
    root = np.hypot(ell, lip)
    lhs = (k * root + np.sqrt(2.0 * lip)) / (ell + lip - root)
    out = lhs - np.sqrt(ell)
    return float(out) if out.ndim == 0 else out


def comparison_surface(k: float, x_grid, y_grid, clamp: bool = True) -> np.ndarray:
    """Margin surface on ``ell = x_grid[i]``, ``L - ell = y_grid[j]``.

    Returns an array of shape ``(len(x_grid), len(y_grid))``. With ``clamp``
    the values are ``min(margin, 0)``, which is zero wherever the
    sufficient-statistic comparator is not beaten by the bound.
    """
    x = np.asarray(x_grid, dtype=float)
    y = np.asarray(y_grid, dtype=float)
    if x.ndim != 1 or y.ndim != 1 or x.size == 0 or y.size == 0:
        raise ValueError("surface grids must be nonempty 1-d sequences")
    if np.any(x <= 0):
        raise ValueError("ell grid must be strictly positive")
    if np.any(y < 0):
        raise ValueError("L - ell grid must be nonnegative")
    if k < 0:
        raise ValueError(f"drift bound k must be nonnegative, got {k}")
    ell, gap = np.meshgrid(x, y, indexing="ij")
    z = comparison_margin(ell, ell + gap, k)
    return np.minimum(z, 0.0) if clamp else z


def default_surface_grid(n_ell: int = 200, n_gap: int = 200,
                         ell_range=(1e-1, 1e3), gap_range=(0.0, 100.0)):
    """Log-spaced ``ell`` axis and linear ``L - ell`` axis."""
    x = np.geomspace(ell_range[0], ell_range[1], n_ell)
    y = np.linspace(gap_range[0], gap_range[1], n_gap)
    return x, y
