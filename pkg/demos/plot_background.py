"""
Uncorrelated background
=======================

Background counts (dark counts, stray light) are uncorrelated with the
emitter and fill in the antibunching dip: with signal fraction rho the
measured curve is 1 + rho^2 (g2 - 1). Knowing rho from count rates, the
true curve can be recovered.
"""

import numpy as np

from photonstat import TABLE1
from photonstat.correlator import background_correct, full_correlation_histogram, normalize
from photonstat.montecarlo import DetectorConfig, EmitterConfig, detect, simulate_emission

T = 0.2
emissions = simulate_emission(EmitterConfig(TABLE1, duration=T, seed=3))
signal = emissions.size / T
background = signal / 9  # 10% of all counts
stream = detect(emissions, DetectorConfig(background_rate=background), seed=4, duration=T)
rho = signal / (signal + background)
print(f"signal fraction {rho:.3f}, expected raw g2(0) = {1 - rho ** 2:.3f}")

# %%
# A narrow bin centred on zero delay keeps the finite-bin bias small.
w = 10e-12
h = normalize(full_correlation_histogram(stream, w, 1e-9, center=-w / 2))
i = int(np.argmin(np.abs(h.left_edges + w / 2)))
print(f"raw g2(0) = {h.g2[i]:.3f} +/- {h.g2_err[i]:.3f}")
print(f"corrected g2(0) = {background_correct(h.g2[i], rho):.3f} "
      f"+/- {h.g2_err[i] / rho ** 2:.3f}")
