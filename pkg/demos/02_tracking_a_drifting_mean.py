"""Track a slowly oscillating Gaussian mean and compare against the guarantee.

Run with ``python3 demos/02_tracking_a_drifting_mean.py``.
"""
# %%
import numpy as np

from tvsgd import tracker
from tvsgd.experiment import ExperimentConfig, check_one_step_contraction, run_experiment
from tvsgd.expfam import make_gaussian_mean
from tvsgd.paths import sinusoid_path
from tvsgd.rng import stream
from tvsgd.sets import FeasibleBox

box = FeasibleBox(-2.0, 2.0)
model = make_gaussian_mean()
path = sinusoid_path(0.0, 1.0, 0.01, box)  # per-step drift at most 0.01

# %% A single run, one observation at a time
gen = stream(7, 0)
truth = path.trajectory(300)
state = tracker.init(truth[0], alpha=0.5)
errors = []
for t in range(300):
    x = model.sampler(truth[t], gen)
    state = tracker.step(state, model, x)
    errors.append(abs(state.lam[0] - truth[t, 0]))
print(f"single run: mean |error| over last 100 steps {np.mean(errors[-100:]):.3f}")

# %% Monte Carlo root-mean-square error against the asymptotic bound
cfg = ExperimentConfig(model, path, alpha="optimal", replications=1000, horizon=2000,
                       tail_window=400, master_seed=20240501)
rep = run_experiment(cfg)
print(f"alpha={rep.alpha} ({rep.verdict.value})")
print(f"tail sup RMSE {rep.tail_sup:.4f} +- {rep.tail_sup_se:.4f}, bound {rep.theoretical_bound:.4f}")
print(f"comparator RMSE {rep.comparator_rmse[-1]:.4f} (analytic {rep.comparator_analytic[-1]:.4f})")

# %% The one-step recursion behind the bound holds at every step
contraction = check_one_step_contraction(
    ExperimentConfig(model, path, alpha=0.5, replications=5000, horizon=300))
print(f"contraction: {contraction.verdict}, flagged {len(contraction.flagged_steps)}/{contraction.n_steps}")
