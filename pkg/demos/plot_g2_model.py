"""
Antibunching and bunching of a three-level emitter
===================================================

The emitter cycles between ground (0) and excited (1) states and is
occasionally shelved in a long-lived dark state (2). Its intensity
correlation g2 starts at zero (one emitter cannot emit two photons at once),
overshoots above one while shelving chops the emission into bright and dark
periods, and relaxes to one.
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from photonstat import TABLE1, g2_analytic, steady_state

p = TABLE1
print(f"pump k = {p.k / 1e6:g} MHz, 1/T1 = {p.inv_T1 / 1e6:g} MHz, "
      f"ISC = {p.gamma12 / 1e6:g} MHz, metastable decay = {p.gamma20 / 1e6:g} MHz")

# %%
# Two time scales appear: a fast rise out of the dip and a slow bunching decay.
print(f"fast rate {p.fast_rate / 1e6:.1f} MHz -> rise time {1e9 / p.fast_rate:.2f} ns")
print(f"slow rate {p.slow_rate / 1e6:.2f} MHz -> bunching decay {1e9 / p.slow_rate:.1f} ns")
print("steady-state populations", np.round(steady_state(p).as_array(), 4))

t = np.linspace(0, 300e-9, 3001)
g = g2_analytic(p, t)
i = np.argmax(g)
print(f"g2(0) = {g[0]}, peak {g[i]:.3f} at {t[i] * 1e9:.2f} ns")

# %%
# Without intersystem crossing the dark state is never reached and the
# curve reduces to the two-level form 1 - exp(-(1/T1 + 2k) t), which never
# exceeds one.
g_two = g2_analytic(p.replace(gamma12=0.0), t)

fig, ax = plt.subplots(figsize=(6, 4))
ax.plot(t * 1e9, g, label="three-level")
ax.plot(t * 1e9, g_two, "--", label="no shelving")
ax.axhline(1, color="grey", lw=0.5)
ax.set_xlabel("delay [ns]")
ax.set_ylabel("g2")
ax.legend()
fig.savefig("g2_model.png", dpi=120)
print("saved g2_model.png")
