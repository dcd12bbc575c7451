"""Synthetic measurement curves with known ground truth."""

import numpy as np

from photonstat.analysis import DecayHistogram, SaturationData, Spectrum
from photonstat.photophysics import SaturationParams, saturation_rate

__all__ = ["synthetic_spectrum", "synthetic_decay", "synthetic_saturation"]


def synthetic_spectrum(zpl_weight=0.7, zpl_center=802.0, zpl_fwhm=1.2, sideband=(804.0, 850.0),
                       wavelength=None, zpl_window=(798.0, 806.0)):
    """Gaussian zero-phonon line plus a phonon sideband, unit total area.

    The sideband is a sin^2 bump confined to ``sideband`` [nm].
    """
    if wavelength is None:
        wavelength = np.arange(770.0, 870.0 + 1e-9, 0.01)
    x = np.asarray(wavelength, dtype=float)
    s = zpl_fwhm / (2 * np.sqrt(2 * np.log(2)))
    zpl = np.exp(-0.5 * ((x - zpl_center) / s) ** 2) / (s * np.sqrt(2 * np.pi))
    lo, hi = sideband
    inside = (x > lo) & (x < hi)
    wing = np.where(inside, np.sin(np.pi * (x - lo) / (hi - lo)) ** 2, 0.0) * 2 / (hi - lo)
    return Spectrum(x, zpl_weight * zpl + (1 - zpl_weight) * wing, zpl_window)


def synthetic_decay(tau=11.5e-9, total_counts=None, amplitude=1000.0, floor=0.0,
                    bin_width=0.1e-9, n_bins=1000, rng=None, rel_noise=0.0):
    """Monoexponential decay histogram, Poisson-sampled when ``rng`` is given.

    With ``total_counts`` the amplitude is scaled so that the expected
    histogram sum equals it. A nonzero ``rel_noise`` replaces Poisson
    sampling by multiplicative Gaussian noise of that relative size.
    """
    t = np.arange(n_bins) * bin_width
    shape = np.exp(-t / tau)
    if total_counts is not None:
        amplitude = (total_counts - floor * n_bins) / shape.sum()
    mean = amplitude * shape + floor
    if rng is None:
        counts = mean
    elif rel_noise > 0:
        counts = np.clip(mean * (1.0 + rng.normal(0.0, rel_noise, mean.size)), 0.0, None)
    else:
        counts = rng.poisson(mean).astype(float)
    return DecayHistogram(t, counts)


def synthetic_saturation(R_inf=75000.0, I_s=1.0, power=None, rel_noise=0.0, rng=None):
    """Saturation curve with optional multiplicative Gaussian noise."""
    if power is None:
        power = np.geomspace(0.1, 10.0, 20) * I_s
    power = np.asarray(power, dtype=float)
    rate = saturation_rate(SaturationParams(R_inf, I_s), power)
    sigma = None
    if rel_noise > 0:
        sigma = rel_noise * rate
        rate = rate + (rng or np.random.default_rng()).normal(0.0, sigma)
    return SaturationData(power, np.clip(rate, 0.0, None), sigma)
