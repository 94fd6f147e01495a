# %% [markdown]
# # The leading-order characteristic function and its correction
#
# Slow variance follows a CIR process; a fast OU factor scales the volatility.
# To first order in sqrt(eps) the characteristic function of log S_T is
# psi0 * (1 + sqrt(eps) * (kappa theta f0 + z f1)).

# %%
import numpy as np

from msv import GroupParams, HestonParams, corrected_cf_at, psi0_at
from msv.heston_cf import cd_coeffs, cd_coeffs_as_printed

p = HestonParams(kappa=1.15, theta=0.04, sigma=0.2, rho_xz=-0.6, r=0.02)
g = GroupParams(v1=0.013, v2=-0.021, v3=0.3, v4=0.017, rho_eff=-0.5, f_bar=0.9)

# %% [markdown]
# ## A few values
# The corrected CF differs from psi0 most at intermediate s.

# %%
s = np.array([0.0, 0.5, 1.0, 2.0, 5.0, 10.0])
base = psi0_at(1.0, 0.0, 0.04, s, p, g.rho_eff)
corr = corrected_cf_at(1.0, 0.0, 0.04, s, p, g, sqrt_eps=0.1)
for row in zip(s, base, corr, np.abs(corr - base)):
    print("s={:5.1f}  psi0={:.6f}  corrected={:.6f}  |diff|={:.2e}".format(*row))

# %% [markdown]
# ## Martingale check
# At s = -i both functions must return exp(x + r tau), whatever the group parameters.

# %%
for tau in (0.5, 2.0, 10.0):
    val = corrected_cf_at(tau, 0.1, 0.05, -1j, p, g, 0.3)
    print(tau, abs(val - np.exp(0.1 + p.r * tau)))

# %% [markdown]
# ## Branch cut at long maturity
# The textbook form with exp(+d tau) follows the principal logarithm and jumps;
# the exp(-d tau) form is continuous in s.

# %%
trap = HestonParams(1.0, 0.05, 0.6, -0.7)
grid = np.linspace(0.01, 50.0, 4000)
stable = cd_coeffs(10.0, grid, trap, -0.7).c
literal, _ = cd_coeffs_as_printed(10.0, grid, trap, -0.7)
print("largest step in Im C, stable form :", np.max(np.abs(np.diff(stable.imag))))
print("largest step in Im C, literal form:", np.max(np.abs(np.diff(literal.imag))))
