# %% [markdown]
# # Coherence and lifetime
#
# Conversion should leave both the coherence time and the radiative
# lifetime of the photons alone: the pump linewidth is tiny next to the
# emitter's, and the nonlinear process adds no time constant.

# %%
from pathlib import Path

from qfcsim.emitter import EmitterConfig
from qfcsim.harness import load_scenario, run
from qfcsim.optics import converted_coherence_time

scenarios = Path(__file__).resolve().parent.parent / "scenarios"

T2 = EmitterConfig().coherence_time_T2
print("T2 in %.1f ps, after conversion %.4f ps" % (T2, converted_coherence_time(T2, 1.6e5)))

# %% [markdown]
# Michelson scans: 16 phase steps per delay, visibility per delay, then an
# exponential fit of visibility against delay.

# %%
for name in ("michelson", "michelson_converted"):
    rep = run(load_scenario(scenarios / f"{name}.scn"))
    print(f"{name:20s} T2 = {rep['T2']:.1f} +- {rep['T2_stderr']:.1f} ps   V0 = {rep['V0']:.3f}")

# %% [markdown]
# Start-stop histograms against the excitation sync, fitted with a fast
# decay plus the slow refilling tail.

# %%
for name in ("lifetime", "lifetime_converted"):
    rep = run(load_scenario(scenarios / f"{name}.scn"))
    print(f"{name:20s} tau_fast = {rep['tau_fast'] / 1e3:.3f} +- {rep['tau_fast_stderr'] / 1e3:.3f} ns"
          f"   tau_slow = {rep['tau_slow'] / 1e6:.2f} us")
