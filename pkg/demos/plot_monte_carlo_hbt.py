"""
Simulated Hanbury Brown-Twiss experiment
=========================================

A kinetic Monte Carlo run produces individual emission events. These pass
through a beamsplitter onto two detectors, with a fixed cable delay on the
second one so that the zero-delay dip is not cut off. The coincidence
histogram is then normalised and fitted.
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from photonstat import TABLE1, g2_bin_average
from photonstat.analysis import fit_g2
from photonstat.correlator import full_correlation_histogram, normalize, start_stop_histogram
from photonstat.montecarlo import DetectorConfig, EmitterConfig, detect, simulate_emission

T = 0.05  # seconds of acquisition
emissions = simulate_emission(EmitterConfig(TABLE1, phi_F=1.0, duration=T, seed=1))
print(f"{emissions.size} photons emitted ({emissions.size / T / 1e6:.2f} MHz)")

stream = detect(emissions, DetectorConfig(electronic_delay=50e-9), seed=2, duration=T)
n_a, n_b = stream.counts()
print(f"detected {n_a} on A and {n_b} on B")

# %%
# The full correlation counts every A-B pair; the start-stop scheme only the
# next B after each A, which is what a classic time-to-amplitude converter
# records. At these high rates start-stop is visibly distorted.
full = normalize(full_correlation_histogram(stream, 0.5e-9, 150e-9, center=50e-9))
ss = start_stop_histogram(stream, 0.5e-9, (0.0, 200e-9))

model = g2_bin_average(TABLE1, full.left_edges - 50e-9, full.bin_width)
z = (full.g2 - model) / full.g2_err
print(f"deviation from the analytic curve: rms z = {np.sqrt(np.mean(z ** 2)):.2f}")

# %%
# Fit the two shelving rates, holding pump and decay rates fixed.
res = fit_g2(full, {"k": TABLE1.k, "inv_T1": TABLE1.inv_T1},
             {"gamma12": 10e6, "gamma20": 3e6}, center=50e-9)
for name in res.free:
    print(f"{name} = {res[name] / 1e6:.2f} +/- {res.std_errors[name] / 1e6:.2f} MHz")
print(f"reduced chi2 {res.reduced_chi2:.2f}")

fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
ax1.plot(full.centers * 1e9, full.g2, ".", ms=2, label="simulated")
ax1.plot(full.centers * 1e9, model, label="analytic")
ax1.set_ylabel("g2")
ax1.legend()
ax2.plot(ss.centers * 1e9, ss.counts, ".", ms=2)
ax2.set_ylabel("start-stop counts")
ax2.set_xlabel("delay [ns]")
fig.savefig("hbt_simulation.png", dpi=120)
print("saved hbt_simulation.png")
