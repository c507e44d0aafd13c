"""Constant step-size SGD tracking of a drifting parameter from independent observations."""

from .bounds import (
    AlphaVerdict,
    BoundInputs,
    ConvexityConstants,
    NoContractionError,
    asymptotic_bound,
    comparison_margin,
    comparison_surface,
    optimal_bound,
    phi,
    validate_alpha,
)
from .experiment import (
    ExperimentConfig,
    ExperimentReport,
    check_fisher_trace,
    check_one_step_contraction,
    compare_with_suff_stat,
    run_experiment,
)
from .expfam import (
    MODEL_REGISTRY,
    BernoulliLogit,
    ExpFamSpec,
    GaussianMean,
    ModelSpec,
    PoissonNatural,
    build_model,
    convexity_constants,
    make_bernoulli_logit,
    make_gaussian_mean,
    make_poisson_natural,
)
from .paths import (
    DriftPath,
    constant_path,
    path_at,
    random_walk_path,
    sinusoid_path,
    step_change_path,
    verify_drift_bound,
)
from .sets import EuclideanBall, FeasibleBox
from .tracker import DivergenceError, TrackerState, init, optimal_alpha, step

__version__ = "0.1.0"
