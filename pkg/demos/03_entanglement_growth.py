"""Half-chain entanglement entropy and its late-time power law.

The reduced state of one half of the chain lives in a small block (one
excitation or none), so the entropy follows from a 2x2 Gram matrix.
"""

# %%
import math

import numpy as np

from waveguide_loc import SystemParams, build_hamiltonian, initial_state, propagate
from waveguide_loc.entanglement import entropy_trace, fit_power_law, von_neumann_entropy, reduced_density_left

params = SystemParams(n_atoms=101, xi=math.pi / 8)
traj = propagate(build_hamiltonian(params), initial_state(params), np.linspace(0, 1500, 301))

# %% Cut right after the central atom.
cut = 51
trace = entropy_trace(traj, cut)
rho = reduced_density_left(traj.state(100), cut)
print("S(500) fast path:", trace.entropy[100], " full diagonalization:",
      von_neumann_entropy(rho, method="full"))

# %% Fit S ~ t^(-beta) over the late window.
fit = fit_power_law(trace.times, trace.entropy, window=(500, 1500))
print(f"beta = {fit.beta:.3f} (r^2 = {fit.r_squared:.4f}, {fit.n_points} points)")
