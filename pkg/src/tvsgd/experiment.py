"""Replicated Monte Carlo simulation of the tracker against a drifting truth.

Replications are simulated in fixed blocks of :data:`BLOCK` trajectories. A
replication's observations come from its own counter-based stream, and block
moments are merged in block order, so reports are bitwise reproducible for
any number of workers.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .bounds import (
    AlphaVerdict,
    BoundInputs,
    ConvexityConstants,
    asymptotic_bound,
    comparison_margin,
    validate_alpha,
)
from .expfam import ExpFamSpec, ModelSpec, convexity_constants
from .paths import DriftPath
from .tracker import DivergenceError, sgd_update

BLOCK = 256
SE_GATE = 3.0
SAMPLER_SE_GATE = 4.0

# stream purposes, the first key component after the master seed
_SIMULATION, _FISHER, _SCORE_MEAN, _SAMPLER_MEAN = 1, 2, 3, 4


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a simulation's output.

    ``alpha`` may be a number or ``"optimal"`` (``1/(ell+L)``). ``lambda1``
    defaults to the truth at ``t = 1``. ``constants`` default to a grid scan of
    the model's curvature on the path's box; generic (non exponential family)
    models must supply them. ``tail_window`` defaults to the last 20% of the
    horizon.
    """

    model: ModelSpec
    path: DriftPath
    alpha: float | str = "optimal"
    lambda1: object = None
    projection: object = None
    replications: int = 1000
    horizon: int = 2000
    tail_window: int | None = None
    master_seed: int = 0
    constants: ConvexityConstants | None = None
    resolution: int = 1024

    def __post_init__(self):
        if self.replications < 2:
            raise ValueError(f"need at least 2 replications, got {self.replications}")
        if self.horizon < 2:
            raise ValueError(f"horizon must be at least 2, got {self.horizon}")
        if self.path.dim != self.model.param_dim:
            raise ValueError("path dimension does not match the model's parameter dimension")
        if self.tail_window is None:
            object.__setattr__(self, "tail_window", max(1, self.horizon // 5))
        if not 1 <= self.tail_window < self.horizon:
            raise ValueError(f"tail_window must lie in [1, horizon), got {self.tail_window}")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.constants is None:
            if not isinstance(self.model, ExpFamSpec):
                raise ValueError("convexity constants are required for non exponential-family models")
            cc = convexity_constants(self.model, self.path.box, self.resolution)
            object.__setattr__(self, "constants", cc)
        if isinstance(self.alpha, str):
            if self.alpha != "optimal":
                raise ValueError(f"alpha must be a number or 'optimal', got {self.alpha!r}")
            object.__setattr__(self, "alpha", self.constants.optimal_alpha)
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        object.__setattr__(self, "alpha", float(self.alpha))
        if self.lambda1 is None:
            lam1 = self.path.trajectory(1)[0]
        else:
            lam1 = np.broadcast_to(np.asarray(self.lambda1, dtype=float), (self.model.param_dim,))
        object.__setattr__(self, "lambda1", tuple(float(v) for v in lam1))

    @property
    def verdict(self) -> AlphaVerdict:
        return validate_alpha(self.alpha, self.constants)

    @property
    def bound_inputs(self) -> BoundInputs:
        return BoundInputs(self.constants, self.path.declared_k, self.model.param_dim, self.alpha)


@dataclass
class _Moments:
    """Per-step count, mean and sum of squared deviations (Chan et al. merge)."""

    n: int
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def of(cls, samples):
        mean = samples.mean(axis=0)
        return cls(samples.shape[0], mean, ((samples - mean) ** 2).sum(axis=0))

    def merge(self, other):
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.n / n)
        m2 = self.m2 + other.m2 + delta * delta * (self.n * other.n / n)
        return _Moments(n, mean, m2)

    @property
    def se(self):
        return np.sqrt(self.m2 / (self.n - 1) / self.n)


@dataclass
class _BlockResult:
    post: _Moments
    pre: _Moments
    gap: _Moments
    comparator: _Moments | None


def _simulate_block(cfg: ExperimentConfig, start: int, stop: int) -> _BlockResult:
    model, horizon = cfg.model, cfg.horizon
    truth = cfg.path.trajectory(horizon)
    u = np.stack([
        rng.open_uniforms(rng.stream(cfg.master_seed, _SIMULATION, r), (horizon, model.n_uniforms))
        for r in range(start, stop)
    ])
    x = model.sample_uniform(truth[None], u)

    lam = np.tile(np.asarray(cfg.lambda1), (stop - start, 1))
    pre = np.empty((stop - start, horizon))
    post = np.empty_like(pre)
    # overflow is caught explicitly as DivergenceError
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(horizon):
            pre[:, t] = np.sum((lam - truth[t]) ** 2, axis=-1)
            try:
                lam = sgd_update(lam, cfg.alpha, model, x[:, t], cfg.projection)
            except DivergenceError as err:
                bad = ~np.all(np.isfinite(lam + cfg.alpha * model.score(x[:, t], lam)), axis=-1)
                r = start + int(np.argmax(bad))
                raise DivergenceError(f"{err} in replication {r} at step {t + 1}") from None
            post[:, t] = np.sum((lam - truth[t]) ** 2, axis=-1)

    inp = cfg.bound_inputs
    gap = post - inp.phi ** 2 * pre - 2.0 * cfg.alpha ** 2 * inp.d * cfg.constants.lip

    comparator = None
    if isinstance(model, ExpFamSpec):
        resid = model.suff_stat(x) - model.log_partition_grad(truth)[None]
        comparator = _Moments.of(np.sum(resid ** 2, axis=-1))
    return _BlockResult(_Moments.of(post), _Moments.of(pre), _Moments.of(gap), comparator)


def _run_blocks(cfg: ExperimentConfig, workers: int | None) -> _BlockResult:
    bounds = [(s, min(s + BLOCK, cfg.replications)) for s in range(0, cfg.replications, BLOCK)]
    if workers is not None and workers > 1 and len(bounds) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(bounds))) as pool:
            results = list(pool.map(_simulate_block, [cfg] * len(bounds),
                                    *zip(*bounds)))
    else:
        results = [_simulate_block(cfg, s, e) for s, e in bounds]
    total = results[0]
    for res in results[1:]:
        total = _BlockResult(
            total.post.merge(res.post),
            total.pre.merge(res.pre),
            total.gap.merge(res.gap),
            None if total.comparator is None else total.comparator.merge(res.comparator),
        )
    return total


@dataclass
class ExperimentReport:
    """Per-step Monte Carlo estimates; index ``i`` corresponds to time ``t = i + 1``.

    ``rmse[i]`` estimates ``||lam_{t+1} - lam*_t||`` in L2(Omega).
    ``rmse_se`` is the delta-method standard error ``se(mse) / (2 rmse)``.
    ``theoretical_bound`` is the limsup bound at the configured step size (inf
    when there is no contraction); it is a claim only when ``verdict`` is
    admissible.
    """

    alpha: float
    constants: ConvexityConstants
    verdict: AlphaVerdict
    mse: np.ndarray
    mse_se: np.ndarray
    rmse: np.ndarray
    rmse_se: np.ndarray
    tail_window: int
    tail_sup: float
    tail_sup_se: float
    theoretical_bound: float
    contraction_gap: np.ndarray
    contraction_gap_se: np.ndarray
    contraction_violations: int
    comparator_rmse: np.ndarray | None = None
    comparator_mse_se: np.ndarray | None = None
    comparator_analytic: np.ndarray | None = None
    truth: np.ndarray = field(default=None, repr=False)

    @property
    def horizon(self) -> int:
        return self.rmse.shape[0]

    @property
    def bound_respected(self) -> bool:
        """Tail estimate within ``SE_GATE`` standard errors of the bound."""
        return self.tail_sup <= self.theoretical_bound + SE_GATE * self.tail_sup_se


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> ExperimentReport:
    """Simulate ``cfg.replications`` independent trajectories and summarise them.

    ``workers`` only affects speed; the report is identical for any value.
    """
    moments = _run_blocks(cfg, workers)
    mse = moments.post.mean
    mse_se = moments.post.se
    rmse = np.sqrt(mse)
    with np.errstate(divide="ignore", invalid="ignore"):
        rmse_se = np.where(rmse > 0, mse_se / (2.0 * rmse), 0.0)

    tail = slice(cfg.horizon - cfg.tail_window, cfg.horizon)
    i_sup = tail.start + int(np.argmax(rmse[tail]))
    inp = cfg.bound_inputs
    bound = asymptotic_bound(inp) if inp.phi < 1.0 else math.inf

    gap, gap_se = moments.gap.mean, moments.gap.se
    violations = int(np.count_nonzero(gap > SE_GATE * gap_se))

    report = ExperimentReport(
        alpha=cfg.alpha,
        constants=cfg.constants,
        verdict=cfg.verdict,
        mse=mse,
        mse_se=mse_se,
        rmse=rmse,
        rmse_se=rmse_se,
        tail_window=cfg.tail_window,
        tail_sup=float(rmse[i_sup]),
        tail_sup_se=float(rmse_se[i_sup]),
        theoretical_bound=float(bound),
        contraction_gap=gap,
        contraction_gap_se=gap_se,
        contraction_violations=violations,
        truth=cfg.path.trajectory(cfg.horizon),
    )
    if moments.comparator is not None:
        report.comparator_rmse = np.sqrt(moments.comparator.mean)
        report.comparator_mse_se = moments.comparator.se
        hess = cfg.model.log_partition_hess(report.truth)
        report.comparator_analytic = np.sqrt(np.trace(hess, axis1=-2, axis2=-1))
    return report


@dataclass
class ContractionReport:
    """Steps where ``E||lam_{t+1}-lam*_t||^2 <= phi^2 E||lam_t-lam*_t||^2 + 2 alpha^2 d L``
    fails by more than ``SE_GATE`` pooled standard errors."""

    verdict: str
    flagged_steps: np.ndarray
    n_steps: int
    lhs: np.ndarray | None = None
    rhs: np.ndarray | None = None

    @property
    def fraction_flagged(self) -> float:
        return len(self.flagged_steps) / self.n_steps if self.n_steps else 0.0

    def passed(self, max_fraction: float = 0.005) -> bool:
        return self.verdict == "inadmissible_alpha" or self.fraction_flagged <= max_fraction


def check_one_step_contraction(cfg: ExperimentConfig, workers: int | None = None) -> ContractionReport:
    """Monte Carlo check of the expected one-step error recursion.

    The check uses paired per-replication differences, so its standard error
    pools the variability of both sides. Skipped (verdict
    ``inadmissible_alpha``) unless the step size is admissible.
    """
    if cfg.verdict is not AlphaVerdict.ADMISSIBLE:
        return ContractionReport("inadmissible_alpha", np.array([], dtype=int), 0)
    m = _run_blocks(cfg, workers)
    inp = cfg.bound_inputs
    rhs = inp.phi ** 2 * m.pre.mean + 2.0 * cfg.alpha ** 2 * inp.d * cfg.constants.lip
    flagged = np.flatnonzero(m.gap.mean > SE_GATE * m.gap.se) + 1
    verdict = "violations" if flagged.size else "ok"
    return ContractionReport(verdict, flagged, cfg.horizon, m.post.mean, rhs)


@dataclass
class FisherTraceResult:
    lam: np.ndarray
    estimate: float
    se: float
    bound: float

    @property
    def passed(self) -> bool:
        # rounding slack: the estimate equals the bound exactly when the score is constant
        return self.estimate <= self.bound * (1 + 1e-12) + SE_GATE * self.se


def _grid(box, points):
    axes = [np.linspace(lo, hi, points) for lo, hi in zip(box.lo, box.hi)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, box.dim)


def check_fisher_trace(model: ModelSpec, box, n_samples: int = 100_000, grid_points: int = 11,
                       seed: int = 0, constants: ConvexityConstants | None = None):
    """Estimate ``E||score(X, lam)||^2`` on a grid over ``box`` and compare with ``d L``."""
    cc = constants if constants is not None else convexity_constants(model, box)
    bound = model.param_dim * cc.lip
    results = []
    for i, lam in enumerate(_grid(box, grid_points)):
        x = model.sampler(lam, rng.stream(seed, _FISHER, i), n_samples)
        sq = np.sum(model.score(x, lam) ** 2, axis=-1)
        se = float(sq.std(ddof=1) / math.sqrt(n_samples))
        results.append(FisherTraceResult(lam, float(sq.mean()), se, bound))
    return results


@dataclass
class MeanCheck:
    """Monte Carlo mean of a vector statistic against its expected value."""

    lam: np.ndarray
    mean: np.ndarray
    se: np.ndarray
    expected: np.ndarray
    gate: float

    @property
    def z(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.se > 0, np.abs(self.mean - self.expected) / self.se,
                            np.where(self.mean == self.expected, 0.0, np.inf))

    @property
    def passed(self) -> bool:
        return bool(np.all(self.z <= self.gate))


def _mean_check(values, lam, expected, gate):
    n = values.shape[0]
    return MeanCheck(np.asarray(lam), values.mean(axis=0), values.std(axis=0, ddof=1) / math.sqrt(n),
                     np.asarray(expected, dtype=float), gate)


def check_score_mean(model: ModelSpec, lam, n_samples: int = 100_000, seed: int = 0, key: int = 0):
    """The score has mean zero under the model: ``|mean| <= 3 se`` per coordinate."""
    lam = np.asarray(lam, dtype=float)
    x = model.sampler(lam, rng.stream(seed, _SCORE_MEAN, key), n_samples)
    return _mean_check(model.score(x, lam), lam, np.zeros(model.param_dim), SE_GATE)


def check_sampler_mean(model: ExpFamSpec, lam, n_samples: int = 100_000, seed: int = 0, key: int = 0):
    """Sampler self-check: mean of ``T(X)`` matches ``grad A(lam)`` within 4 se."""
    lam = np.asarray(lam, dtype=float)
    x = model.sampler(lam, rng.stream(seed, _SAMPLER_MEAN, key), n_samples)
    return _mean_check(model.suff_stat(x), lam, model.log_partition_grad(lam), SAMPLER_SE_GATE)


@dataclass
class ComparisonRecord:
    """Tracker against the one-observation estimator ``T(X_t)``.

    ``comparator_rmse[i]`` estimates ``||T(X_t) - grad A(lam*_t)||`` in L2, whose
    analytic value is ``sqrt(A''(lam*_t))``. ``sampler_flags`` lists the
    (1-based) steps where the Monte Carlo mean square misses ``A''`` by more
    than four standard errors.
    """

    report: ExperimentReport
    comparator_rmse: np.ndarray
    comparator_analytic: np.ndarray
    comparator_mse_se: np.ndarray
    sampler_flags: np.ndarray
    tracker_tail_sup: float
    comparator_tail_min: float
    margin: float

    @property
    def margin_sign(self) -> int:
        return int(np.sign(self.margin))

    @property
    def tracker_wins_empirically(self) -> bool:
        return self.tracker_tail_sup < self.comparator_tail_min


def compare_with_suff_stat(cfg: ExperimentConfig, workers: int | None = None) -> ComparisonRecord:
    """Run the experiment and set the tracker's tail error against ``T(X_t)``."""
    if not isinstance(cfg.model, ExpFamSpec):
        raise ValueError("comparison needs an exponential-family model")
    if cfg.model.param_dim != 1:
        raise ValueError(f"comparison is defined for d = 1, got d = {cfg.model.param_dim}")
    report = run_experiment(cfg, workers)
    analytic_mse = report.comparator_analytic ** 2
    miss = np.abs(report.comparator_rmse ** 2 - analytic_mse)
    flags = np.flatnonzero(miss > SAMPLER_SE_GATE * report.comparator_mse_se) + 1
    tail = slice(cfg.horizon - cfg.tail_window, cfg.horizon)
    cc = cfg.constants
    return ComparisonRecord(
        report=report,
        comparator_rmse=report.comparator_rmse,
        comparator_analytic=report.comparator_analytic,
        comparator_mse_se=report.comparator_mse_se,
        sampler_flags=flags,
        tracker_tail_sup=report.tail_sup,
        comparator_tail_min=float(report.comparator_analytic[tail].min()),
        margin=comparison_margin(cc.ell, cc.lip, cfg.path.declared_k),
    )


__all__ = [
    "BLOCK",
    "ComparisonRecord",
    "ContractionReport",
    "ExperimentConfig",
    "ExperimentReport",
    "FisherTraceResult",
    "MeanCheck",
    "check_fisher_trace",
    "check_one_step_contraction",
    "check_sampler_mean",
    "check_score_mean",
    "compare_with_suff_stat",
    "run_experiment",
]
