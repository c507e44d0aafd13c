import math

import numpy as np
import pytest

from tvsgd import experiment as exp_mod
from tvsgd.bounds import AlphaVerdict, ConvexityConstants
from tvsgd.experiment import (
    ExperimentConfig,
    check_fisher_trace,
    check_one_step_contraction,
    compare_with_suff_stat,
    run_experiment,
)
from tvsgd.expfam import ModelSpec, make_bernoulli_logit, make_gaussian_mean, make_poisson_natural
from tvsgd.paths import constant_path, random_walk_path, sinusoid_path, step_change_path
from tvsgd.sets import FeasibleBox
from tvsgd.tracker import DivergenceError

GAUSS = make_gaussian_mean()
BOX = FeasibleBox(-2.0, 2.0)


def gaussian_cfg(path=None, **kw):
    kw.setdefault("replications", 2000)
    kw.setdefault("horizon", 300)
    return ExperimentConfig(GAUSS, path or constant_path(0.0, BOX), **kw)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
def test_first_step_from_truth(alpha):
    # lam_2 = alpha * X_1 with X_1 ~ N(0, 1): E lam_2^2 = alpha^2
    rep = run_experiment(gaussian_cfg(alpha=alpha, lambda1=0.0, horizon=5, master_seed=3))
    assert abs(rep.mse[0] - alpha**2) <= 3 * rep.mse_se[0]
    assert abs(rep.rmse[0] - alpha) <= 3 * rep.rmse_se[0]


def test_stationary_error_matches_ar1_variance():
    # e_{t+1} = (1 - a) e_t + a Z_t  =>  stationary variance a^2 / (1 - (1 - a)^2) = a / (2 - a)
    alpha = 0.5
    rep = run_experiment(gaussian_cfg(alpha=alpha, replications=4000, horizon=200, master_seed=11))
    target = alpha / (2 - alpha)
    late = slice(100, 200)
    z = np.abs(rep.mse[late] - target) / rep.mse_se[late]
    assert np.median(z) < 1.5 and z.max() < 4.5
    assert abs(rep.rmse[-1] - math.sqrt(1 / 3)) <= 3 * rep.rmse_se[-1]
    assert rep.tail_sup <= rep.theoretical_bound
    assert rep.theoretical_bound == pytest.approx(math.sqrt(2) / (2 - math.sqrt(2)))


def test_report_fields_and_invariants():
    rep = run_experiment(gaussian_cfg(sinusoid_path(0.0, 1.0, 0.01, BOX), alpha="optimal",
                                      tail_window=60))
    assert rep.alpha == 0.5 and rep.verdict is AlphaVerdict.ADMISSIBLE
    assert rep.horizon == 300 and rep.rmse.shape == rep.rmse_se.shape == (300,)
    assert np.all(rep.rmse >= 0)
    assert rep.tail_sup == rep.rmse[-60:].max() <= rep.rmse.max()
    assert rep.bound_respected
    assert rep.comparator_rmse.shape == (300,)


@pytest.mark.parametrize("kw", [dict(replications=0), dict(replications=1), dict(horizon=1),
                                dict(tail_window=300), dict(alpha=-1.0), dict(alpha="best"),
                                dict(master_seed=-1)])
def test_config_errors(kw):
    with pytest.raises(ValueError):
        gaussian_cfg(**kw)


def test_generic_model_needs_constants():
    class Custom(ModelSpec):
        pass

    with pytest.raises(ValueError, match="constants"):
        ExperimentConfig(Custom(), constant_path(0.0, BOX))


def test_generic_model_runs_with_supplied_constants():
    class ShiftedGaussian(ModelSpec):
        """N(lam, 1) written without the exponential-family helpers."""

        def log_density(self, x, lam):
            return -0.5 * np.sum((x - lam) ** 2, -1) - 0.5 * math.log(2 * math.pi)

        def score(self, x, lam):
            return x - lam

        def sample_uniform(self, lam, u):
            from scipy.special import ndtri
            return lam + ndtri(u)

    cfg = ExperimentConfig(ShiftedGaussian(), constant_path(0.0, BOX), alpha=0.5,
                           replications=300, horizon=50, constants=ConvexityConstants(1, 1))
    rep = run_experiment(cfg)
    ref = run_experiment(gaussian_cfg(alpha=0.5, replications=300, horizon=50))
    np.testing.assert_allclose(rep.mse, ref.mse, rtol=1e-12)
    assert rep.comparator_rmse is None


def test_reproducible_across_workers_and_runs():
    cfg = gaussian_cfg(sinusoid_path(0.0, 1.0, 0.01, BOX), alpha=0.5, replications=700, master_seed=5)
    a = run_experiment(cfg, workers=1)
    b = run_experiment(cfg, workers=3)
    c = run_experiment(cfg)
    for name in ("mse", "mse_se", "rmse", "contraction_gap", "comparator_rmse"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes() == getattr(c, name).tobytes()


def test_replications_do_not_depend_on_block_layout(monkeypatch):
    cfg = gaussian_cfg(alpha=0.5, replications=300, horizon=40, master_seed=9)
    ref = run_experiment(cfg)
    monkeypatch.setattr(exp_mod, "BLOCK", 7)
    other = run_experiment(cfg)
    np.testing.assert_allclose(other.mse, ref.mse, rtol=1e-12)
    np.testing.assert_allclose(other.mse_se, ref.mse_se, rtol=1e-9)


def test_different_seeds_differ():
    a = run_experiment(gaussian_cfg(alpha=0.5, horizon=20, master_seed=1))
    b = run_experiment(gaussian_cfg(alpha=0.5, horizon=20, master_seed=2))
    assert not np.array_equal(a.mse, b.mse)


def test_divergence_propagates_with_location():
    cfg = gaussian_cfg(alpha=3.0, replications=10, horizon=2000, lambda1=1.0)
    with pytest.raises(DivergenceError, match=r"replication \d+ at step \d+"):
        run_experiment(cfg)


@pytest.mark.parametrize("path", [
    sinusoid_path(0.0, 1.0, 0.01, BOX),
    random_walk_path(0.0, 0.05, BOX, seed=1),
    step_change_path(-0.5, 150, 1.0, BOX),
], ids=["sinusoid", "random_walk", "step"])
def test_contraction_holds_for_shipped_paths(path):
    rep = check_one_step_contraction(gaussian_cfg(path, alpha=0.5, replications=2000, horizon=300))
    assert rep.verdict == "ok" and rep.flagged_steps.size == 0 and rep.passed()
    assert np.all(rep.lhs <= rep.rhs)


def test_contraction_first_step_dominated_by_noise_term():
    rep = check_one_step_contraction(gaussian_cfg(alpha=0.5, lambda1=0.0, horizon=3))
    # lam_1 = lam*: lhs = alpha^2 E score^2 = 0.25, rhs = 2 alpha^2 d L = 0.5
    assert rep.rhs[0] == 0.5
    assert rep.lhs[0] < rep.rhs[0]


def test_contraction_skipped_for_inadmissible_alpha():
    rep = check_one_step_contraction(gaussian_cfg(alpha=1.0))
    assert rep.verdict == "inadmissible_alpha" and rep.passed()
    assert check_one_step_contraction(gaussian_cfg(alpha=0.1)).verdict == "inadmissible_alpha"


def test_projected_poisson_tracker_respects_bound():
    box = FeasibleBox(0.0, math.log(2))
    cfg = ExperimentConfig(make_poisson_natural(), random_walk_path(0.3, 0.01, box, seed=2),
                           projection=box, replications=1000, horizon=400, master_seed=4)
    assert cfg.constants.ell == pytest.approx(1.0) and cfg.constants.lip == pytest.approx(2.0)
    assert cfg.alpha == pytest.approx(1 / 3)
    rep = run_experiment(cfg)
    assert rep.tail_sup <= rep.theoretical_bound
    assert check_one_step_contraction(cfg).passed()


def test_fisher_trace_examples():
    g = check_fisher_trace(GAUSS, BOX, 100_000, grid_points=3, seed=1)
    assert all(r.passed for r in g)
    assert all(abs(r.estimate - 1.0) <= 3 * r.se for r in g)
    p = check_fisher_trace(make_poisson_natural(), FeasibleBox(0, math.log(2)), 100_000, 11, seed=1)
    assert p[0].bound == pytest.approx(2.0)
    assert abs(p[0].estimate - 1.0) <= 3 * p[0].se
    assert all(r.passed for r in p)
    b = check_fisher_trace(make_bernoulli_logit(), FeasibleBox(-1, 1), 100_000, 11, seed=1)
    assert b[5].lam[0] == 0.0 and b[5].estimate == pytest.approx(0.25, rel=1e-12)
    assert all(r.passed for r in b)


def test_compare_with_suff_stat_gaussian():
    cfg = gaussian_cfg(sinusoid_path(0.0, 1.0, 0.01, BOX), alpha=0.5, replications=1000,
                       horizon=400, master_seed=21)
    rec = compare_with_suff_stat(cfg)
    assert rec.sampler_flags.size == 0
    np.testing.assert_array_equal(rec.comparator_analytic, 1.0)
    assert rec.tracker_tail_sup < 1.0 and rec.tracker_wins_empirically
    assert rec.margin > 0 and rec.margin_sign == 1  # the bound alone does not certify the win


def test_compare_flags_a_broken_sampler():
    class WideGaussian(type(GAUSS)):
        def sample_uniform(self, lam, u):
            return super().sample_uniform(lam, u) * 1.2

    cfg = ExperimentConfig(WideGaussian(), constant_path(0.0, BOX), alpha=0.5,
                           replications=1000, horizon=50)
    assert compare_with_suff_stat(cfg).sampler_flags.size > 0


def test_compare_rejects_non_exponential_family():
    class Custom(ModelSpec):
        def score(self, x, lam):
            return x - lam

        def sample_uniform(self, lam, u):
            return lam + u

    cfg = ExperimentConfig(Custom(), constant_path(0.0, BOX), alpha=0.5, replications=2,
                           horizon=5, constants=ConvexityConstants(1, 1))
    with pytest.raises(ValueError, match="exponential-family"):
        compare_with_suff_stat(cfg)
