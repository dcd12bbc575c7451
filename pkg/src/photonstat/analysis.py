"""
Model fitting and derived photophysical quantities.

All fits are weighted Levenberg-Marquardt least squares. Positive
parameters are optimised as logarithms and their uncertainties mapped back
with the delta method.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import warnings

import numpy as np
from scipy.optimize import least_squares

from photonstat.photophysics import (
    ParameterError,
    RateParams,
    SaturationParams,
    g2_analytic,
    g2_bin_average,
    max_emission_rate,
    saturation_rate,
)

__all__ = [
    "FitResult",
    "FitError",
    "SaturationData",
    "DecayHistogram",
    "Spectrum",
    "fit_g2",
    "fit_g2_curve",
    "fit_saturation",
    "fit_lifetime",
    "debye_waller",
    "quantum_yield",
    "three_two_ratio",
]

XTOL = 1e-8
FTOL = 1e-12
MAX_ITER = 500


class FitError(ValueError):
    """Data cannot constrain the requested fit."""


@dataclass
class FitResult:
    """Outcome of a least-squares fit.

    ``params`` holds every model parameter (free and fixed) in SI units;
    ``std_errors`` and ``covariance`` refer to the free ones, in the order
    of ``free``.
    """

    params: dict
    std_errors: dict
    covariance: np.ndarray
    free: tuple
    reduced_chi2: float
    reduced_chi2_initial: float
    n_iterations: int
    converged: bool
    flags: list = field(default_factory=list)
    units: dict = field(default_factory=dict)

    @property
    def identifiable(self):
        return not any(f.startswith("non-identifiable") for f in self.flags)

    def __getitem__(self, name):
        return self.params[name]


def _lm(residuals, x0, n_data, scale_cov):
    """Run MINPACK LM and return (x, cov_x, chi2_red, chi2_red0, nfev, ok)."""
    x0 = np.asarray(x0, dtype=float)
    dof = max(n_data - x0.size, 1)
    r0 = residuals(x0)
    res = least_squares(residuals, x0, method="lm", xtol=XTOL, ftol=FTOL,
                        max_nfev=MAX_ITER * (x0.size + 1))
    chi2 = float(np.sum(res.fun ** 2)) / dof
    J = res.jac
    try:
        cov = np.linalg.inv(J.T @ J)
    except np.linalg.LinAlgError:
        cov = np.full((x0.size, x0.size), np.inf)
    if scale_cov:
        cov = cov * chi2
    return res.x, cov, chi2, float(np.sum(r0 ** 2)) / dof, res.nfev, res.status > 0


def _pack(x, cov, names, log_mask):
    """Map optimiser coordinates back to parameters with delta-method errors."""
    vals = np.where(log_mask, np.exp(x), x)
    D = np.where(log_mask, vals, 1.0)
    cov_p = cov * np.outer(D, D)
    with np.errstate(invalid="ignore"):
        err = np.sqrt(np.abs(np.diag(cov_p)))
    return dict(zip(names, vals)), dict(zip(names, err)), cov_p


# --- g2 ------------------------------------------------------------------------

_RATE_NAMES = ("k", "inv_T1", "gamma12", "gamma20")


def fit_g2_curve(delays, g2, sigma=None, fixed=None, init=None, free=("gamma12", "gamma20"),
                 contrast=False, bin_width=None, priors=None):
    """Fit the three-level g2 model to sampled data.

    Parameters
    ----------
    delays : array_like
        Delays [s] relative to zero delay. If ``bin_width`` is given these
        are left bin edges and the model is averaged over each bin.
    g2, sigma : array_like
        Data and 1-sigma errors; unit weights when ``sigma`` is None.
    fixed : dict
        Values for rates that are not free, in s^-1.
    init : dict
        Starting values for the free rates (and ``contrast``).
    free : sequence of str
        Free rates, any of k, inv_T1, gamma12, gamma20.
    contrast : bool
        Add a free factor c so that the model is 1 + c (g2 - 1), which
        absorbs uncorrelated background.
    priors : dict
        ``{name: (mean, sigma)}`` Gaussian constraints on free parameters.
        g2 alone fixes only three combinations of the four rates, so freeing
        all of them needs a prior, typically on inv_T1 from a lifetime fit.
    """
    delays = np.asarray(delays, dtype=float)
    y = np.asarray(g2, dtype=float)
    fixed = dict(fixed or {})
    init = dict(init or {})
    free = tuple(free)
    bad = set(free) - set(_RATE_NAMES)
    if bad:
        raise ValueError(f"unknown free parameters {sorted(bad)}")
    missing = [n for n in _RATE_NAMES if n not in free and n not in fixed]
    if missing:
        raise ValueError(f"values required for fixed rates {missing}")
    names = free + (("contrast",) if contrast else ())
    n_free = len(names)
    if y.size < n_free:
        raise FitError(f"{y.size} data points cannot constrain {n_free} parameters")
    x0 = []
    for n in names:
        v = init.get(n, 1.0 if n == "contrast" else None)
        if v is None or not v > 0:
            raise ValueError(f"initial guess for {n} must be > 0")
        x0.append(np.log(v))
    priors = dict(priors or {})
    if set(priors) - set(names):
        raise ValueError("priors may only constrain free parameters")
    prior_idx = [names.index(n) for n in priors]
    prior_mu = np.array([priors[n][0] for n in priors], dtype=float)
    prior_sd = np.array([priors[n][1] for n in priors], dtype=float)
    w = np.ones_like(y) if sigma is None else 1.0 / np.asarray(sigma, dtype=float)
    penalty = np.full(y.size + len(priors), 1e6)

    def model(x):
        vals = dict(fixed)
        with np.errstate(over="ignore"):
            vals.update(zip(names, np.exp(x)))
        c = vals.pop("contrast", 1.0)
        p = RateParams(**vals)
        if bin_width is None:
            g = g2_analytic(p, np.abs(delays))
        else:
            g = g2_bin_average(p, delays, bin_width)
        return 1.0 + c * (g - 1.0)

    def residuals(x):
        try:
            r = (model(x) - y) * w
        except ParameterError:
            return penalty
        if prior_idx:
            r = np.concatenate([r, (np.exp(x[prior_idx]) - prior_mu) / prior_sd])
        return r

    x, cov, chi2, chi2_0, nfev, ok = _lm(residuals, x0, y.size, scale_cov=sigma is None)
    params, errs, cov_p = _pack(x, cov, names, np.ones(n_free, bool))
    all_params = {n: float(fixed.get(n, params.get(n, np.nan))) for n in _RATE_NAMES}
    if contrast:
        all_params["contrast"] = float(params["contrast"])
    flags = []
    if not ok:
        flags.append("not converged")
    for n in names:
        v, e = params[n], errs[n]
        start = init.get(n, 1.0)
        if not np.isfinite(e) or e > v or not 1e-3 * start < v < 1e3 * start:
            flags.append(f"non-identifiable: {n}")
    # the bunching decay must be resolved by the sampled delays
    step = bin_width if bin_width is not None else np.median(np.diff(np.unique(np.abs(delays))))
    try:
        slow = 1.0 / RateParams(**{n: all_params[n] for n in _RATE_NAMES}).slow_rate
    except (ParameterError, ZeroDivisionError):
        slow = np.nan
    if not (3 * step < slow < np.abs(delays).max()):
        flags.append("non-identifiable: bunching time not resolved by the data")
    units = {n: "s^-1" for n in _RATE_NAMES}
    if contrast:
        units["contrast"] = "1"
    return FitResult(all_params, {n: float(errs[n]) for n in names}, cov_p, names, chi2, chi2_0,
                     int(nfev), ok, flags, units)


def fit_g2(hist, fixed, init, free=("gamma12", "gamma20"), contrast=False, center=0.0,
           max_delay=None, bin_average=True, priors=None):
    """Fit a normalised coincidence histogram.

    ``center`` is the delay of zero physical delay (the electronic delay).
    Bins with zero counts are weighted as if they held one count.
    """
    if not hist.normalized:
        raise ValueError("histogram must be normalised first")
    left = hist.left_edges - center
    denom = hist.n_starts * hist.n_stops * hist.bin_width / hist.total_time
    sigma = np.sqrt(np.maximum(hist.counts, 1)) / denom
    sel = np.ones(hist.n_bins, bool)
    if max_delay is not None:
        sel &= np.abs(left + 0.5 * hist.bin_width) <= max_delay
    if bin_average:
        return fit_g2_curve(left[sel], hist.g2[sel], sigma[sel], fixed, init, free, contrast,
                            bin_width=hist.bin_width, priors=priors)
    mid = left + 0.5 * hist.bin_width
    return fit_g2_curve(mid[sel], hist.g2[sel], sigma[sel], fixed, init, free, contrast, priors=priors)


# --- saturation ------------------------------------------------------------------

@dataclass
class SaturationData:
    power: np.ndarray
    rate: np.ndarray
    sigma: np.ndarray | None = None

    def __post_init__(self):
        self.power = np.asarray(self.power, dtype=float)
        self.rate = np.asarray(self.rate, dtype=float)
        if self.sigma is not None:
            self.sigma = np.asarray(self.sigma, dtype=float)
        if self.power.shape != self.rate.shape:
            raise ValueError("power and rate must have equal length")
        if np.any(self.power < 0) or np.any(self.rate < 0):
            raise ValueError("power and rate must be >= 0")


def _saturation_guess(I, R):
    # double-reciprocal line: 1/R = 1/R_inf + (I_s/R_inf) / I
    ok = (I > 0) & (R > 0)
    if ok.sum() >= 2:
        slope, icpt = np.polyfit(1.0 / I[ok], 1.0 / R[ok], 1)
        if slope > 0 and icpt > 0:
            return 1.0 / icpt, slope / icpt
    return 2.0 * R.max(), float(np.median(I[I > 0])) if np.any(I > 0) else 1.0


def fit_saturation(data, init=None):
    """Fit R = R_inf (I/I_s) / (1 + I/I_s) to a saturation curve."""
    if data.power.size < 3:
        raise FitError("saturation fit needs at least 3 points")
    I, R = data.power, data.rate
    if init is None:
        R0, I0 = _saturation_guess(I, R)
    else:
        R0, I0 = init["R_inf"], init["I_s"]
    w = np.ones_like(R) if data.sigma is None else 1.0 / data.sigma

    def residuals(x):
        with np.errstate(over="ignore", invalid="ignore"):
            return (saturation_rate(SaturationParams(*np.exp(x)), I) - R) * w

    x, cov, chi2, chi2_0, nfev, ok = _lm(residuals, np.log([R0, I0]), R.size, data.sigma is None)
    params, errs, cov_p = _pack(x, cov, ("R_inf", "I_s"), np.ones(2, bool))
    flags = [] if ok else ["not converged"]
    if params["I_s"] > 10 * I.max() or not errs["R_inf"] < 0.5 * params["R_inf"]:
        flags.append("non-identifiable: R_inf (no data beyond the saturation knee)")
    return FitResult({k: float(v) for k, v in params.items()}, {k: float(v) for k, v in errs.items()},
                     cov_p, ("R_inf", "I_s"), chi2, chi2_0, int(nfev), ok, flags,
                     {"R_inf": "counts/s", "I_s": "power"})


# --- lifetime --------------------------------------------------------------------

@dataclass
class DecayHistogram:
    """Fluorescence decay: counts versus time after excitation [s]."""

    times: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.counts = np.asarray(self.counts, dtype=float)
        if self.times.shape != self.counts.shape:
            raise ValueError("times and counts must have equal length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be increasing")
        if np.any(self.counts < 0):
            raise ValueError("counts must be >= 0")


def fit_lifetime(hist):
    """Fit A exp(-t/tau) + floor to a decay histogram.

    Poisson weights are taken from the data in a first pass and from the
    model in a second, which removes most of the low-count bias.
    """
    t, y = hist.times, hist.counts
    if y.size < 4:
        raise FitError("lifetime fit needs at least 4 bins")
    tail = y[-max(1, y.size // 10):]
    floor0 = float(tail.mean())
    peak = float(y.max())
    if not peak > 10 * floor0:
        raise FitError("decay spans less than one decade: lifetime is not identifiable")
    sig = y - floor0
    use = sig > 0.05 * sig.max()
    if use.sum() >= 2:
        slope = np.polyfit(t[use], np.log(sig[use]), 1)[0]
        tau0 = -1.0 / slope if slope < 0 else (t[-1] - t[0]) / 3
    else:
        tau0 = (t[-1] - t[0]) / 3
    A0 = peak - floor0
    t0 = t[0]

    def model(x):
        return np.exp(x[0]) * np.exp(-(t - t0) / np.exp(x[1])) + x[2]

    x = np.array([np.log(A0), np.log(tau0), floor0])
    sigma = np.sqrt(np.maximum(y, 1.0))
    for _ in range(2):
        w = 1.0 / sigma

        def residuals(x, w=w):
            return (model(x) - y) * w

        x, cov, chi2, chi2_0, nfev, ok = _lm(residuals, x, y.size, scale_cov=False)
        sigma = np.sqrt(np.maximum(model(x), 1.0))
    params, errs, cov_p = _pack(x, cov, ("amplitude", "tau", "floor"), np.array([True, True, False]))
    flags = [] if ok else ["not converged"]
    first = y[: max(2, y.size // 2)]
    if np.mean(np.diff(first) > 0) > 0.5:
        flags.append("non-monotone: rising data dominates the decay window")
    # amplitude refers to t = t[0]
    return FitResult({k: float(v) for k, v in params.items()}, {k: float(v) for k, v in errs.items()},
                     cov_p, ("amplitude", "tau", "floor"), chi2, chi2_0, int(nfev), ok, flags,
                     {"amplitude": "counts", "tau": "s", "floor": "counts"})


# --- spectrum and emission rates -------------------------------------------------

@dataclass
class Spectrum:
    wavelength: np.ndarray
    intensity: np.ndarray
    zpl_window: tuple

    def __post_init__(self):
        self.wavelength = np.asarray(self.wavelength, dtype=float)
        self.intensity = np.asarray(self.intensity, dtype=float)
        if np.any(np.diff(self.wavelength) <= 0):
            raise ValueError("wavelengths must be strictly increasing")
        if np.any(self.intensity < 0):
            raise ValueError("intensity must be >= 0")
        lo, hi = self.zpl_window
        if not (self.wavelength[0] <= lo <= hi <= self.wavelength[-1]):
            raise ValueError("zero-phonon window must lie inside the sampled range")


def _integrate(x, y, lo, hi):
    if hi <= lo:
        return 0.0
    inside = (x > lo) & (x < hi)
    xs = np.concatenate([[lo], x[inside], [hi]])
    ys = np.concatenate([[np.interp(lo, x, y)], y[inside], [np.interp(hi, x, y)]])
    return float(np.trapezoid(ys, xs))


def debye_waller(spectrum, baseline=0.0):
    """Fraction of the emission inside the zero-phonon window."""
    y = np.clip(spectrum.intensity - baseline, 0.0, None)
    x = spectrum.wavelength
    total = float(np.trapezoid(y, x))
    if total <= 0:
        raise ValueError("spectrum has zero total intensity")
    return min(_integrate(x, y, *spectrum.zpl_window) / total, 1.0)


def quantum_yield(rates, detected_rate, efficiency):
    """Quantum yield from a saturated detected count rate.

    Inverts the maximum emission rate of the three-level system. Values
    above 1 are clamped with a warning.
    """
    if not 0 < efficiency <= 1:
        raise ValueError(f"efficiency must be in (0, 1], got {efficiency!r}")
    phi = (detected_rate / efficiency) / max_emission_rate(rates, 1.0)
    if phi > 1:
        warnings.warn(f"quantum yield {phi:.3f} > 1 clamped to 1", RuntimeWarning, stacklevel=2)
        phi = 1.0
    return phi


def three_two_ratio(rates):
    """Maximum emission rate relative to the same emitter without ISC."""
    return max_emission_rate(rates, 1.0) / max_emission_rate(rates.replace(gamma12=0.0), 1.0)
