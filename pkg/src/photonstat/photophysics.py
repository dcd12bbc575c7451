"""
Three-level emitter photophysics.

Rate-equation model of a ground (0), excited (1) and metastable (2) state,
its closed-form intensity autocorrelation, steady state, saturation law and
maximum emission rate. All rates are in s^-1 and all times in seconds.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
import math

import numpy as np
from scipy.linalg import expm

__all__ = [
    "ParameterError",
    "OscillatoryRegimeError",
    "RateParams",
    "LevelPopulations",
    "SaturationParams",
    "TABLE1",
    "rate_matrix",
    "propagate",
    "steady_state",
    "two_photon_correlator",
    "g2_analytic",
    "g2_bin_average",
    "saturation_rate",
    "max_emission_rate",
]

MHz = 1e6


class ParameterError(ValueError):
    """Rates or arguments outside the physical domain of the model."""


class OscillatoryRegimeError(ParameterError):
    """The correlator's square-root argument is negative (underdamped regime)."""


@dataclass(frozen=True)
class RateParams:
    """Rates of the three-level model in s^-1.

    Parameters
    ----------
    k : float
        Absorption (pump) rate 0 -> 1. Also drives stimulated 1 -> 0.
    inv_T1 : float
        Spontaneous relaxation rate 1/T1 of the excited state.
    gamma12 : float
        Intersystem-crossing rate 1 -> 2.
    gamma20 : float
        Decay rate of the metastable state 2 -> 0.
    """

    k: float
    inv_T1: float
    gamma12: float
    gamma20: float

    def __post_init__(self):
        for name in ("k", "inv_T1", "gamma12", "gamma20"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ParameterError(f"{name} must be finite and >= 0, got {v!r}")
        if self.inv_T1 <= 0:
            raise ParameterError(f"inv_T1 must be > 0, got {self.inv_T1!r}")

    @classmethod
    def from_mhz(cls, k, inv_T1, gamma12, gamma20):
        return cls(k * MHz, inv_T1 * MHz, gamma12 * MHz, gamma20 * MHz)

    def to_mhz(self):
        return {n: getattr(self, n) / MHz for n in ("k", "inv_T1", "gamma12", "gamma20")}

    def replace(self, **changes):
        return replace(self, **changes)

    @property
    def Gamma(self):
        """Total excited-state decay rate excluding stimulated emission."""
        return self.inv_T1 + self.gamma12

    @property
    def gamma0(self):
        return 0.5 * (self.Gamma + 2.0 * self.k + self.gamma20)

    @property
    def radicand(self):
        h = 0.5 * (self.Gamma + 2.0 * self.k - self.gamma20)
        return h * h - self.gamma12 * self.k

    @property
    def R(self):
        rad = self.radicand
        if rad < 0:
            raise OscillatoryRegimeError(
                f"negative radicand {rad:.6g} s^-2: underdamped regime is not modelled")
        return math.sqrt(rad)

    @property
    def decay_product(self):
        """gamma0**2 - R**2, evaluated without cancellation."""
        return self.gamma20 * (self.Gamma + 2.0 * self.k) + self.gamma12 * self.k

    @property
    def slow_rate(self):
        """gamma0 - R, the bunching decay rate."""
        # (g0 - R) = (g0^2 - R^2) / (g0 + R) avoids cancellation when R ~ g0
        return self.decay_product / (self.gamma0 + self.R)

    @property
    def fast_rate(self):
        """gamma0 + R, the antibunching rise rate."""
        return self.gamma0 + self.R


# Fit values for the NE8 centre, k, 1/T1, ISC rate, metastable decay.
TABLE1 = RateParams.from_mhz(440.0, 87.0, 17.0, 6.1)


@dataclass(frozen=True)
class LevelPopulations:
    rho0: float
    rho1: float
    rho2: float

    def __post_init__(self):
        vals = (self.rho0, self.rho1, self.rho2)
        if any(not math.isfinite(v) or v < -1e-12 or v > 1 + 1e-12 for v in vals):
            raise ParameterError(f"populations must lie in [0, 1], got {vals}")
        if abs(sum(vals) - 1.0) > 1e-9:
            raise ParameterError(f"populations must sum to 1, got {sum(vals)!r}")

    @classmethod
    def from_array(cls, rho):
        return cls(float(rho[0]), float(rho[1]), float(rho[2]))

    def as_array(self):
        return np.array([self.rho0, self.rho1, self.rho2])


GROUND = LevelPopulations(1.0, 0.0, 0.0)


@dataclass(frozen=True)
class SaturationParams:
    R_inf: float
    I_s: float

    def __post_init__(self):
        if not (self.R_inf > 0 and self.I_s > 0):
            raise ParameterError("R_inf and I_s must be > 0")


def rate_matrix(params):
    """Generator M of the population dynamics, d(rho)/dt = M @ rho.

    State order is (0, 1, 2). Columns sum to zero.
    """
    k, g1, isc, g20 = params.k, params.inv_T1, params.gamma12, params.gamma20
    return np.array([
        [-k, g1 + k, g20],
        [k, -(g1 + isc + k), 0.0],
        [0.0, isc, -g20],
    ])


def _expm_generator(M, t):
    """exp(M t) by eigendecomposition, with scaled-and-squared fallback."""
    if t == 0:
        return np.eye(3)
    w, V = np.linalg.eig(M)
    scale = max(np.max(np.abs(w)), 1e-300)
    gaps = np.abs(w[:, None] - w[None, :]) + np.eye(3) * scale
    if np.iscomplexobj(w) or gaps.min() / scale < 1e-8:
        return expm(M * t)
    try:
        Vinv = np.linalg.inv(V)
    except np.linalg.LinAlgError:
        return expm(M * t)
    if np.linalg.cond(V) > 1e8:
        return expm(M * t)
    return (V * np.exp(w * t)) @ Vinv


def propagate(params, initial, t):
    """Populations after a time ``t`` starting from ``initial``.

    Negative entries at the 1e-12 round-off level are clipped to zero and
    the vector renormalised.
    """
    if not t >= 0:
        raise ParameterError(f"t must be >= 0, got {t!r}")
    if t == 0:
        return initial
    rho = _expm_generator(rate_matrix(params), t) @ initial.as_array()
    rho = np.clip(rho.real, 0.0, None)
    return LevelPopulations.from_array(rho / rho.sum())


def steady_state(params):
    """Stationary populations of the rate equations."""
    if params.k <= 0:
        raise ParameterError("k = 0: the ground state is absorbing, no unique steady state")
    if params.gamma20 == 0:
        if params.gamma12 > 0:
            return LevelPopulations(0.0, 0.0, 1.0)
        # metastable level decoupled and empty
        rho1 = params.k / (params.Gamma + 2.0 * params.k)
        return LevelPopulations(1.0 - rho1, rho1, 0.0)
    denom = params.decay_product
    rho1 = params.k * params.gamma20 / denom
    rho2 = params.gamma12 * params.k / denom
    rho0 = (params.gamma20 * (params.Gamma + params.k)) / denom
    return LevelPopulations(rho0, rho1, rho2)


def _correlator_terms(params, t):
    """Return p(t) / (k/T1) for an array of delays.

    Evaluated as
        g20/(ab) + e^{-g0 t} [ sinh(Rt)/R (1 - g20 g0/(ab)) - g20 cosh(Rt)/(ab) ]
    which is algebraically the two-exponential form with a = g0 - R,
    b = g0 + R, and is exactly zero at t = 0.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ParameterError("delay t must be >= 0")
    R = params.R
    ab = params.decay_product
    a = params.slow_rate
    g0, g20 = params.gamma0, params.gamma20
    ea = np.exp(-a * t)
    # sinh(Rt)/R e^{-g0 t} = e^{-a t} (1 - e^{-2Rt}) / (2R)
    if R > 0:
        sinh_term = ea * (-np.expm1(-2.0 * R * t)) / (2.0 * R)
    else:
        sinh_term = ea * t
    cosh_term = 0.5 * ea * (1.0 + np.exp(-2.0 * R * t))
    return g20 / ab + sinh_term * (1.0 - g20 * g0 / ab) - g20 * cosh_term / ab


def two_photon_correlator(params, t):
    """Two-photon correlator p(t) in s^-1.

    Rate of detecting a photon at delay ``t`` after a photon that left the
    emitter in its ground state.
    """
    if params.k == 0:
        return np.zeros_like(np.asarray(t, dtype=float))
    p = params.k * params.inv_T1 * _correlator_terms(params, t)
    return np.where(np.asarray(t) == 0, 0.0, p)


def _g2_coefficients(params):
    """g2(t) = 1 + A e^{-a t} - B e^{-b t}."""
    if params.k <= 0:
        raise ParameterError("k must be > 0 for g2")
    if params.gamma20 <= 0:
        raise ParameterError("gamma20 must be > 0 for g2 (p(inf) vanishes)")
    R = params.R
    a, b = params.slow_rate, params.fast_rate
    ab = params.decay_product
    if R == 0:
        raise ParameterError("R = 0: two-exponential coefficients are degenerate")
    A = (1.0 - params.gamma20 / a) * ab / (2.0 * R * params.gamma20)
    B = (1.0 - params.gamma20 / b) * ab / (2.0 * R * params.gamma20)
    return A, a, B, b


def g2_analytic(params, t):
    """Normalised autocorrelation p(t)/p(inf). Exactly 0 at t = 0."""
    if params.k <= 0:
        raise ParameterError("k must be > 0 for g2")
    if params.gamma20 <= 0:
        raise ParameterError("gamma20 must be > 0 for g2 (p(inf) vanishes)")
    terms = _correlator_terms(params, t)
    g = terms * params.decay_product / params.gamma20
    return np.where(np.asarray(t) == 0, 0.0, g)


def _g2_integral(params, x):
    """Integral of g2 from 0 to x >= 0."""
    A, a, B, b = _g2_coefficients(params)
    return x - A * np.expm1(-a * x) / a + B * np.expm1(-b * x) / b


def g2_bin_average(params, left, width):
    """Average of g2(|t|) over bins [left, left + width).

    Bins may straddle or lie below zero delay; g2 is taken as symmetric.
    """
    lo = np.asarray(left, dtype=float)
    hi = lo + width
    F = lambda x: _g2_integral(params, x)  # noqa: E731
    total = np.where(
        lo >= 0, F(np.abs(hi)) - F(np.abs(lo)),
        np.where(hi <= 0, F(np.abs(lo)) - F(np.abs(hi)), F(np.abs(lo)) + F(np.abs(hi))))
    return total / width


def saturation_rate(params, I):
    """Count rate R_inf (I/I_s) / (1 + I/I_s)."""
    I = np.asarray(I, dtype=float)
    if np.any(I < 0):
        raise ParameterError("excitation power must be >= 0")
    x = I / params.I_s
    return params.R_inf * x / (1.0 + x)


def max_emission_rate(params, phi_F):
    """Photon emission rate under infinite pumping, in photons/s."""
    if not 0 < phi_F <= 1:
        raise ParameterError(f"phi_F must be in (0, 1], got {phi_F!r}")
    if params.gamma20 == 0:
        if params.gamma12 > 0:
            raise ParameterError("gamma20 = 0 with gamma12 > 0: emitter shelves permanently")
        return 0.5 * params.inv_T1 * phi_F
    return (params.inv_T1 + params.gamma12) * phi_F / (2.0 + params.gamma12 / params.gamma20)
