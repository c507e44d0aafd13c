"""Constant step-size stochastic gradient ascent on the log-likelihood.

One observation per step::

    lam_{t+1} = P(lam_t + alpha * score(x_t, lam_t))

where ``P`` is the Euclidean projection onto an optional feasible set (a
:class:`~tvsgd.sets.FeasibleBox` or :class:`~tvsgd.sets.EuclideanBall`), or
the identity.
"""

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .bounds import AlphaVerdict, ConvexityConstants, validate_alpha
from .expfam import ModelSpec
from .sets import EuclideanBall, FeasibleBox

__all__ = [
    "AlphaVerdict",
    "DivergenceError",
    "TrackerState",
    "init",
    "optimal_alpha",
    "sgd_update",
    "step",
    "validate_alpha",
]


class DivergenceError(FloatingPointError):
    """A non-finite score or iterate. ``state`` holds the offending input state."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


@dataclass(frozen=True, eq=False)
class TrackerState:
    lam: np.ndarray
    alpha: float
    step_index: int = 1
    projection: FeasibleBox | EuclideanBall | None = None
    #: set when ``init`` had to move ``lambda1`` into the feasible set
    projected_on_init: bool = False


def init(lambda1, alpha: float, projection=None) -> TrackerState:
    """Start a tracker at ``lambda1`` with step size ``alpha`` (time index 1)."""
    if not (np.isfinite(alpha) and alpha > 0):
        raise ValueError(f"step size must be positive, got {alpha}")
    lam = np.atleast_1d(np.asarray(lambda1, dtype=float)).copy()
    moved = False
    if projection is not None:
        if projection.dim != lam.shape[-1]:
            raise ValueError(f"lambda1 has dimension {lam.shape[-1]}, projection set {projection.dim}")
        if not np.all(projection.contains(lam)):
            warnings.warn(f"lambda1 {lam.tolist()} outside {projection!r}; projected", stacklevel=2)
            lam = projection.project(lam)
            moved = True
    lam.setflags(write=False)
    return TrackerState(lam, float(alpha), 1, projection, moved)


def sgd_update(lam, alpha, model: ModelSpec, x, projection=None):
    """One projected SGD step, vectorised over leading axes of ``lam`` and ``x``.

    Raises :class:`DivergenceError` if any score component is not finite.
    """
    g = model.score(x, lam)
    if not np.all(np.isfinite(g)):
        raise DivergenceError("diverged: non-finite score")
    with np.errstate(over="ignore", invalid="ignore"):
        new = lam + alpha * g
    if projection is not None:
        new = projection.project(new)
    if not np.all(np.isfinite(new)):
        raise DivergenceError("diverged: non-finite iterate")
    return new


def step(state: TrackerState, model: ModelSpec, x) -> TrackerState:
    """Advance ``state`` by one observation ``x``. Pure: no hidden randomness."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (model.obs_dim,) or state.lam.shape != (model.param_dim,):
        raise ValueError(
            f"shape mismatch: x {x.shape}, lam {state.lam.shape}, "
            f"model expects ({model.obs_dim},) and ({model.param_dim},)"
        )
    try:
        new = sgd_update(state.lam, state.alpha, model, x, state.projection)
    except DivergenceError as err:
        raise DivergenceError(f"{err} at step {state.step_index}", state) from None
    new.setflags(write=False)
    return replace(state, lam=new, step_index=state.step_index + 1)


def optimal_alpha(cc: ConvexityConstants) -> float:
    """Step size ``1/(ell + L)`` minimising the asymptotic tracking bound."""
    return cc.optimal_alpha
