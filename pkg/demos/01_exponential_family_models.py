"""Exponential-family models: densities, scores and curvature constants.

Run with ``python3 demos/01_exponential_family_models.py``.
"""
# %%
import numpy as np

from tvsgd.expfam import build_model, convexity_constants, score_fd_error
from tvsgd.rng import stream
from tvsgd.sets import FeasibleBox

gen = stream(2024, 0)

# %% Three shipped models, each on a bounded parameter box
cases = [
    ("gaussian_mean", {}, FeasibleBox(-2.0, 2.0)),
    ("poisson_natural", {}, FeasibleBox(0.0, np.log(2.0))),
    ("bernoulli_logit", {}, FeasibleBox(-1.0, 1.0)),
]

for name, params, box in cases:
    model = build_model(name, **params)
    cc = convexity_constants(model, box)
    print(f"{name:16s} ell={cc.ell:.6f} L={cc.lip:.6f} alpha*={cc.optimal_alpha:.6f}")

# %% The analytic score agrees with a central finite difference of the log-density
for name, params, box in cases:
    model = build_model(name, **params)
    lam = box.lo + (box.hi - box.lo) * gen.random((5, 1))
    x = model.sampler(lam, gen)
    print(f"{name:16s} worst relative fd error {score_fd_error(model, x, lam).max():.2e}")

# %% The score has zero mean under the model it came from
model = build_model("poisson_natural")
lam = np.array([0.4])
x = model.sampler(lam, gen, size=200_000)
g = model.score(x, lam)
print(f"poisson score mean {g.mean():+.5f} (se {g.std(ddof=1) / np.sqrt(g.size):.5f})")
