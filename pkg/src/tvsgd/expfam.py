"""Parametric models and canonical exponential families.

All model callables broadcast over leading axes: observations have trailing
shape ``(obs_dim,)``, parameters ``(param_dim,)``. Sampling goes through
``sample_uniform``, a deterministic map from uniforms on (0, 1) to
observations, so any random stream can drive it reproducibly.
"""

import numpy as np
from scipy import optimize, special, stats

from .bounds import ConvexityConstants
from .rng import open_uniforms
from .sets import FeasibleBox


class ModelSpec:
    """A parametric family ``p(x | lam)`` for independent observations.

    Subclasses implement ``log_density``, ``score`` and ``sample_uniform``.
    Instances are immutable and hold no random state.
    """

    name = "model"
    obs_dim = 1
    param_dim = 1
    #: number of uniforms consumed per observation by ``sample_uniform``
    n_uniforms = 1

    def log_density(self, x, lam):
        raise NotImplementedError

    def score(self, x, lam):
        raise NotImplementedError

    def sample_uniform(self, lam, u):
        """Map uniforms ``u[..., n_uniforms]`` to draws from ``p(. | lam)``."""
        raise NotImplementedError

    def sampler(self, lam, rng, size=None):
        """Draw observations from ``p(. | lam)`` using generator ``rng``.

        ``size`` adds leading sample axes; ``lam`` must broadcast against them.
        """
        lam = np.asarray(lam, dtype=float)
        lead = () if size is None else tuple(np.atleast_1d(size))
        batch = np.broadcast_shapes(lead, lam.shape[:-1])
        u = open_uniforms(rng, batch + (self.n_uniforms,))
        return self.sample_uniform(lam, u)

    def __repr__(self):
        return f"{type(self).__name__}()"


class ExpFamSpec(ModelSpec):
    """Canonical family ``h(x) exp(<lam, T(x)> - A(lam))``.

    ``log_density`` and ``score`` are derived from the four primitives, which
    subclasses supply.
    """

    def suff_stat(self, x):
        raise NotImplementedError

    def log_partition(self, lam):
        raise NotImplementedError

    def log_partition_grad(self, lam):
        raise NotImplementedError

    def log_partition_hess(self, lam):
        raise NotImplementedError

    def log_base_measure(self, x):
        raise NotImplementedError

    def log_density(self, x, lam):
        lam = np.asarray(lam, dtype=float)
        inner = np.sum(lam * self.suff_stat(x), axis=-1)
        return self.log_base_measure(x) + inner - self.log_partition(lam)

    def score(self, x, lam):
        return self.suff_stat(x) - self.log_partition_grad(lam)


class _Scalar(ExpFamSpec):
    """One-dimensional family with ``T(x) = x``.

    Subclasses give the scalar functions ``_a``, ``_da``, ``_d2a`` of the log
    partition and ``_log_h`` of the base measure.
    """

    def suff_stat(self, x):
        return np.asarray(x, dtype=float)

    def log_partition(self, lam):
        return self._a(np.asarray(lam, dtype=float)[..., 0])

    def log_partition_grad(self, lam):
        return self._da(np.asarray(lam, dtype=float))

    def log_partition_hess(self, lam):
        return self._d2a(np.asarray(lam, dtype=float))[..., None, None]

    def log_base_measure(self, x):
        return self._log_h(np.asarray(x, dtype=float)[..., 0])


class GaussianMean(_Scalar):
    """Normal observations with known variance, natural parameter ``mean / variance``.

    Canonical form: ``T(x) = x``, ``A(lam) = variance * lam**2 / 2`` and
    ``h`` the ``N(0, variance)`` density, so ``A'' = variance`` everywhere.
    With the default unit variance the natural parameter is the mean itself.
    """

    name = "gaussian_mean"

    def __init__(self, variance: float = 1.0):
        if not (np.isfinite(variance) and variance > 0):
            raise ValueError(f"variance must be positive, got {variance}")
        self.variance = float(variance)

    def _a(self, lam):
        return 0.5 * self.variance * lam * lam

    def _da(self, lam):
        return self.variance * lam

    def _d2a(self, lam):
        return np.full(lam.shape[:-1], self.variance)

    def _log_h(self, x):
        return -0.5 * x * x / self.variance - 0.5 * np.log(2.0 * np.pi * self.variance)

    def sample_uniform(self, lam, u):
        mean = self.variance * np.asarray(lam, dtype=float)
        return mean + np.sqrt(self.variance) * special.ndtri(u)

    def __repr__(self):
        return f"GaussianMean(variance={self.variance})"


class PoissonNatural(_Scalar):
    """Poisson counts with ``lam = log(rate)``; ``A(lam) = exp(lam)``."""

    name = "poisson_natural"

    def _a(self, lam):
        return np.exp(lam)

    _da = _a

    def _d2a(self, lam):
        return np.exp(lam[..., 0])

    def _log_h(self, x):
        return -special.gammaln(x + 1.0)

    def sample_uniform(self, lam, u):
        return stats.poisson.ppf(u, np.exp(np.asarray(lam, dtype=float)))


class BernoulliLogit(_Scalar):
    """Binary outcomes with ``lam = log-odds``; ``A(lam) = log(1 + e^lam)``."""

    name = "bernoulli_logit"

    def _a(self, lam):
        return np.logaddexp(0.0, lam)

    def _da(self, lam):
        return special.expit(lam)

    def _d2a(self, lam):
        # expit never overflows; the product is exactly 1/4 at lam = 0
        lam = lam[..., 0]
        return special.expit(lam) * special.expit(-lam)

    def _log_h(self, x):
        return np.zeros_like(x)

    def sample_uniform(self, lam, u):
        return (u < special.expit(np.asarray(lam, dtype=float))).astype(float)


def make_gaussian_mean(variance: float = 1.0) -> GaussianMean:
    return GaussianMean(variance)


def make_poisson_natural() -> PoissonNatural:
    return PoissonNatural()


def make_bernoulli_logit() -> BernoulliLogit:
    return BernoulliLogit()


MODEL_REGISTRY = {
    "gaussian_mean": make_gaussian_mean,
    "poisson_natural": make_poisson_natural,
    "bernoulli_logit": make_bernoulli_logit,
}


def build_model(model_id: str, **params) -> ModelSpec:
    """Look up ``model_id`` in the registry and build it with ``params``."""
    try:
        builder = MODEL_REGISTRY[model_id]
    except KeyError:
        known = ", ".join(sorted(MODEL_REGISTRY))
        raise ValueError(f"unknown model id {model_id!r}; known: {known}") from None
    return builder(**params)


def _curvature_extremes(model, lam):
    eig = np.linalg.eigvalsh(model.log_partition_hess(lam))
    return eig[..., 0], eig[..., -1]


def _refine(model, axes, index, which, sign):
    """Polish a grid extremum inside its neighbouring cells."""
    cell = [(ax[max(i - 1, 0)], ax[min(i + 1, len(ax) - 1)]) for ax, i in zip(axes, index)]
    start = np.array([ax[i] for ax, i in zip(axes, index)])

    def objective(v):
        return sign * float(_curvature_extremes(model, np.atleast_1d(v)[None, :])[which][0])

    if len(axes) == 1:
        lo, hi = cell[0]
        if lo == hi:
            return sign * objective(start)
        res = optimize.minimize_scalar(objective, bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-12})
    else:
        res = optimize.minimize(objective, start, method="L-BFGS-B", bounds=cell)
    return sign * min(res.fun, objective(start))


def convexity_constants(model: ExpFamSpec, box: FeasibleBox,
                        resolution: int = 1024) -> ConvexityConstants:
    """Extreme curvature of ``A`` over ``box``.

    ``ell`` is the minimum of the smallest Hessian eigenvalue and ``lip`` the
    maximum of the largest. Both are located by a grid scan with
    ``resolution`` points per axis (endpoints included), then polished by a
    bounded local search in the cells next to the best grid point, so an
    interior extremum between grid nodes is not missed.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    if box.dim != model.param_dim:
        raise ValueError(f"box has dimension {box.dim}, model expects {model.param_dim}")
    axes = [np.linspace(lo, hi, resolution) for lo, hi in zip(box.lo, box.hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    low, high = _curvature_extremes(model, grid.reshape(-1, box.dim))
    shape = grid.shape[:-1]
    i_low = np.unravel_index(np.argmin(low), shape)
    i_high = np.unravel_index(np.argmax(high), shape)
    ell = min(float(low.min()), _refine(model, axes, i_low, 0, 1.0))
    lip = max(float(high.max()), _refine(model, axes, i_high, 1, -1.0))
    if not ell > 0:
        raise ValueError(f"not strongly convex on {box!r}: min curvature {ell}")
    return ConvexityConstants(ell, lip)


def finite_difference_score(model: ModelSpec, x, lam, h: float = 1e-5):
    """Central-difference gradient of ``log_density`` in ``lam``."""
    lam = np.asarray(lam, dtype=float)
    grad = np.empty(np.broadcast_shapes(np.shape(x)[:-1], lam.shape[:-1]) + (lam.shape[-1],))
    for j in range(lam.shape[-1]):
        e = np.zeros(lam.shape[-1])
        e[j] = h
        grad[..., j] = (model.log_density(x, lam + e) - model.log_density(x, lam - e)) / (2 * h)
    return grad


def score_fd_error(model: ModelSpec, x, lam, h: float = 1e-5):
    """Relative discrepancy between ``score`` and its finite-difference oracle.

    The error is scaled by ``max(1, |score|)`` so that points where the score
    vanishes are compared in absolute terms.
    """
    analytic = model.score(x, lam)
    numeric = finite_difference_score(model, x, lam, h)
    scale = np.maximum(1.0, np.linalg.norm(analytic, axis=-1))
    return np.linalg.norm(analytic - numeric, axis=-1) / scale
