"""Generators for the drifting true parameter sequence.

A :class:`DriftPath` is an immutable description of ``lam*_1, lam*_2, ...``
confined to a box, together with a declared per-step drift bound ``K``. Every
emitted value is projected onto the box; since box projection is
nonexpansive, that never increases a step length.
"""

from dataclasses import dataclass, field

import numpy as np

from .rng import stream
from .sets import FeasibleBox

KINDS = ("constant", "sinusoid", "bounded_random_walk", "step_change")


def _vec(value, d):
    arr = np.broadcast_to(np.asarray(value, dtype=float), (d,)).copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DriftPath:
    """Deterministic true-parameter path.

    Parameters
    ----------
    kind : str
        One of ``constant``, ``sinusoid``, ``bounded_random_walk``,
        ``step_change``.
    box : FeasibleBox
        Feasible set; every value is clamped into it.
    declared_k : float
        Claimed bound on ``||lam*_{t+1} - lam*_t||``. Random walks enforce it;
        the other kinds merely declare it and :func:`verify_drift_bound` checks.
    center : float or array
        Base point (the constant value, sinusoid midline, pre-jump level or
        random-walk start).
    amplitude, omega : sinusoid ``center + amplitude * sin(omega * t)``.
    jump_time, jump_size : step change; values with ``t > jump_time`` are
        shifted by ``jump_size``.
    seed : random-walk seed.
    step_scale : standard deviation of raw random-walk increments before
        clipping; defaults to ``declared_k``.
    """

    kind: str
    box: FeasibleBox
    declared_k: float
    center: tuple = (0.0,)
    amplitude: tuple = (0.0,)
    omega: float = 0.0
    jump_time: int = 0
    jump_size: tuple = (0.0,)
    seed: int = 0
    step_scale: float | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown path kind {self.kind!r}; known: {', '.join(KINDS)}")
        if not (np.isfinite(self.declared_k) and self.declared_k >= 0):
            raise ValueError(f"declared_k must be finite and nonnegative, got {self.declared_k}")
        d = self.box.dim
        for name in ("center", "amplitude", "jump_size"):
            object.__setattr__(self, name, tuple(_vec(getattr(self, name), d).tolist()))
        object.__setattr__(self, "declared_k", float(self.declared_k))

    @property
    def dim(self) -> int:
        return self.box.dim

    def trajectory(self, horizon: int) -> np.ndarray:
        """Values ``lam*_1 .. lam*_horizon`` as an array of shape ``(horizon, d)``."""
        if horizon < 1:
            raise ValueError("horizon must be positive")
        if self.kind == "bounded_random_walk":
            return self._random_walk(horizon)
        return self._deterministic(np.arange(1, horizon + 1, dtype=float))

    def _deterministic(self, t):
        t = t[:, None]
        c = np.asarray(self.center)
        if self.kind == "constant":
            raw = np.broadcast_to(c, (t.shape[0], self.dim))
        elif self.kind == "sinusoid":
            raw = c + np.asarray(self.amplitude) * np.sin(self.omega * t)
        else:
            raw = c + np.where(t > self.jump_time, 1.0, 0.0) * np.asarray(self.jump_size)
        return self.box.project(raw)

    def _random_walk(self, horizon):
        # cached per instance: path_at(t) for increasing t would otherwise be quadratic
        cached = self._cache.get("walk")
        if cached is not None and cached.shape[0] >= horizon:
            return cached[:horizon].copy()
        k = self.declared_k
        scale = k if self.step_scale is None else self.step_scale
        # prefix-stable: the first n increments do not depend on horizon
        steps = stream(self.seed, 0).standard_normal((horizon - 1, self.dim)) * scale
        out = np.empty((horizon, self.dim))
        out[0] = self.box.project(np.asarray(self.center))
        lo, hi = self.box.lo, self.box.hi
        # shrink the clip radius by the rounding error of the add/subtract round trip
        magnitude = float(np.max(np.maximum(np.abs(lo), np.abs(hi)))) + k
        radius = max(k - 8 * np.finfo(float).eps * magnitude * np.sqrt(self.dim), 0.0)
        for i in range(horizon - 1):
            inc = steps[i]
            norm = float(np.sqrt(inc @ inc))
            if norm > radius:
                inc = inc * (radius / norm)
            out[i + 1] = np.minimum(np.maximum(out[i] + inc, lo), hi)
        self._cache["walk"] = out
        return out.copy()


def constant_path(center, box: FeasibleBox, declared_k: float = 0.0) -> DriftPath:
    return DriftPath("constant", box, declared_k, center=center)


def sinusoid_path(center, amplitude, omega: float, box: FeasibleBox,
                  declared_k: float | None = None) -> DriftPath:
    """``center + amplitude * sin(omega t)``; default ``K = ||amplitude|| * |omega|``."""
    if declared_k is None:
        declared_k = float(np.linalg.norm(np.broadcast_to(amplitude, (box.dim,)))) * abs(omega)
    return DriftPath("sinusoid", box, declared_k, center=center, amplitude=amplitude, omega=omega)


def random_walk_path(start, k: float, box: FeasibleBox, seed: int = 0,
                     step_scale: float | None = None) -> DriftPath:
    return DriftPath("bounded_random_walk", box, k, center=start, seed=seed, step_scale=step_scale)


def step_change_path(center, jump_time: int, jump_size, box: FeasibleBox,
                     declared_k: float | None = None) -> DriftPath:
    if declared_k is None:
        declared_k = float(np.linalg.norm(np.broadcast_to(jump_size, (box.dim,))))
    return DriftPath("step_change", box, declared_k, center=center,
                     jump_time=jump_time, jump_size=jump_size)


def path_at(path: DriftPath, t: int) -> np.ndarray:
    """The true parameter at time ``t >= 1``."""
    if t < 1:
        raise ValueError(f"time index starts at 1, got {t}")
    if path.kind == "bounded_random_walk":
        return path.trajectory(t)[-1]
    return path._deterministic(np.array([t], dtype=float))[0]


def verify_drift_bound(path: DriftPath, horizon: int) -> float:
    """Largest observed step ``||lam*_{t+1} - lam*_t||`` for ``t < horizon``."""
    if horizon < 2:
        raise ValueError("horizon must be at least 2")
    traj = path.trajectory(horizon)
    return float(np.linalg.norm(np.diff(traj, axis=0), axis=-1).max())
