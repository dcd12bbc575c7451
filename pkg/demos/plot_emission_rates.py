"""
Count rates, quantum yield and spectrum
=======================================

Under strong pumping the count rate saturates. The saturated rate, together
with the detection efficiency and the rate-equation model, fixes the
fluorescence quantum yield. A lifetime fit and the zero-phonon fraction of
the spectrum complete the picture.
"""

import numpy as np

from photonstat import TABLE1, max_emission_rate
from photonstat.analysis import (
    debye_waller,
    fit_lifetime,
    fit_saturation,
    quantum_yield,
    three_two_ratio,
)
from photonstat.synthetic import synthetic_decay, synthetic_saturation, synthetic_spectrum

rng = np.random.default_rng(0)

# %%
# Saturation curve with 5% noise, as a power series would give it.
data = synthetic_saturation(R_inf=75000.0, I_s=1.0, rel_noise=0.05, rng=rng)
sat = fit_saturation(data)
print(f"R_inf = {sat['R_inf']:.0f} +/- {sat.std_errors['R_inf']:.0f} counts/s, "
      f"I_s = {sat['I_s']:.2f} +/- {sat.std_errors['I_s']:.2f}")

# %%
# Shelving halves the attainable emission rate compared with a two-level
# emitter of the same decay rate.
print(f"max emission at unit yield: {max_emission_rate(TABLE1, 1.0) / 1e6:.2f} MHz")
print(f"three/two-level ratio: {three_two_ratio(TABLE1):.3f}")
phi = quantum_yield(TABLE1, sat["R_inf"], efficiency=0.005)
print(f"quantum yield at 0.5% detection efficiency: {phi:.2f}")

# %%
# Lifetime from a Poissonian decay histogram.
life = fit_lifetime(synthetic_decay(11.5e-9, total_counts=1e5, rng=rng))
print(f"tau = {life['tau'] * 1e9:.2f} +/- {life.std_errors['tau'] * 1e9:.2f} ns")

# %%
# Debye-Waller factor: weight of the zero-phonon line in the spectrum.
spec = synthetic_spectrum(zpl_weight=0.7)
print(f"Debye-Waller factor {debye_waller(spec):.3f}")
