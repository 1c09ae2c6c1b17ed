# %% [markdown]
# # The conversion stage
#
# A visible photon at 710.74 nm mixes with a 1549.9 nm pump and leaves at
# the difference frequency.  Efficiency follows sin^2 in the square root of
# pump power; the phase-matching window is a sinc^2 in detuning.

# %%
import numpy as np

from qfcsim.harness import Scenario, run
from qfcsim.optics import (
    ConversionSpec,
    PumpConfig,
    acceptance_transmission,
    conversion_probability,
    dfg_output_wavelength,
)
from qfcsim.tcspc import fit_sinc2

spec = ConversionSpec()
print("output wavelength  %.3f nm" % dfg_output_wavelength(710.74, 1549.90))
print("first maximum at   %.1f mW" % (1e3 * spec.optimal_power))

# %% [markdown]
# Analytic curve, then the Monte Carlo version on a coarse grid.

# %%
for P in np.arange(0.0, 0.31, 0.05):
    print(f"{P:5.2f} W   eta = {conversion_probability(PumpConfig(power=P), spec):.4f}")

sweep = run(Scenario("efficiency_sweep", duration=0.2, seed=1, powers=tuple(np.round(np.arange(0, 0.31, 0.03), 2)) + (0.15,)))
print(sweep.tables["efficiency.csv"])
print("fitted normalized efficiency %.3f /(W cm^2)" % sweep["eta_normalized"])

# %% [markdown]
# Acceptance bandwidth: sample the window and fit it back.

# %%
det = np.linspace(-150, 150, 61)
fit = fit_sinc2(det, acceptance_transmission(det, spec))
print(fit.report())
