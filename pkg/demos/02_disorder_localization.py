"""Position disorder pins the excitation near where it started.

Averages populations over disorder draws and fits an exponential profile to
extract the localization length, comparing weak and moderate disorder.
"""

# %%
import math

from waveguide_loc import EnsembleSpec, SystemParams, run_ensemble

base = SystemParams(n_atoms=101, xi=math.pi / 8)

# %% Fifty draws per disorder strength keeps this quick.
for w_over_pi in (0.003, 0.01, 0.03):
    spec = EnsembleSpec(base.replace(disorder_width=w_over_pi * math.pi), n_realizations=50,
                        observables={"localization_fit", "total_population"})
    res = run_ensemble(spec)
    fits = ", ".join(f"t={t:g}: {f.zeta_L:5.1f}" for t, f in res.fits.items())
    print(f"w/pi = {w_over_pi:<6} zeta_L  {fits}   P_tot(1500) = {res.mean['total_population'][-1]:.3f}")

# %% A flat profile is reported with an infinite length rather than an error.
clean = run_ensemble(EnsembleSpec(base, n_realizations=1, observables={"localization_fit"}))
print("clean chain fit at t=1500:", clean.fits[1500.0])
