"""Closed-form tracking bounds and where they beat the sufficient-statistic estimate.

Run with ``python3 demos/03_bounds_and_comparison_surface.py``.
"""
# %%
import numpy as np

from tvsgd.bounds import (
    BoundInputs,
    ConvexityConstants,
    asymptotic_bound,
    comparison_surface,
    default_surface_grid,
    optimal_bound,
)

cc = ConvexityConstants(1.0, 1.0)

# %% The bound as a function of step size, over the admissible range [1/(ell+L), 1/L)
for alpha in np.linspace(cc.optimal_alpha, 0.95 / cc.lip, 5):
    inp = BoundInputs(cc, k=0.01, d=1, alpha=alpha)
    print(f"alpha={alpha:.3f} phi={inp.phi:.4f} bound={asymptotic_bound(inp):.4f}")
print(f"at the optimal step: {optimal_bound(cc, k=0.01, d=1):.4f}")

# %% Margin surface: negative cells are where the bound certifies a win
ells, gaps = default_surface_grid(n_ell=60, n_gap=40)
for k in (1.0, 2.0):
    z = comparison_surface(k, ells, gaps)
    i, j = np.unravel_index(np.argmin(z), z.shape)
    print(f"K={k}: {np.mean(z < 0):.1%} of cells negative, deepest {z[i, j]:.3f} "
          f"at ell={ells[i]:.2f}, L-ell={gaps[j]:.2f}")
