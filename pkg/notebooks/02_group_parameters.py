# %% [markdown]
# # Group parameters from an explicit fast factor
#
# With f(y) = exp(y - m - nu^2) the Poisson-equation averages have closed forms:
# <phi'> = -1 and <xi'> = -exp(-nu^2/2). The numerical solver should reproduce them.

# %%
import math

import numpy as np

from msv import HestonParams, compute_group_params, normalize_f
from msv.group_params import poisson_residual, poisson_sources, stationary_averages

p = HestonParams(kappa=2.0, theta=0.5, sigma=0.4, rho_xz=-0.6, r=0.02)

# %%
for nu in (0.2, 0.3, 0.5, 0.8):
    spec = normalize_f("exponential", 0.0, nu, rho_xy=-0.8, rho_yz=0.3)
    avgs = stationary_averages(spec)
    print(
        f"nu={nu:.1f}  <phi'>+1={avgs['dphi'] + 1:+.1e}  "
        f"<xi'>+exp(-nu^2/2)={avgs['dxi'] + math.exp(-nu * nu / 2):+.1e}  "
        f"<f phi'>={avgs['f_dphi']:.6f}  <f xi'>={avgs['f_dxi']:.6f}"
    )

# %% [markdown]
# ## Residual of the Poisson equation and grid refinement

# %%
spec = normalize_f("exponential", 0.0, 0.3, rho_xy=-0.8, rho_yz=0.3)
avgs = stationary_averages(spec)
for sol, src, name in zip(avgs["solutions"], poisson_sources(spec), ("phi", "xi")):
    print(name, "residual", poisson_residual(sol, src))

for n in (512, 2048, 8192):
    g = compute_group_params(spec, p, grid_size=n)
    print(n, np.round(g.v, 12))
