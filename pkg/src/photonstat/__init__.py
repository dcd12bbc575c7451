"""Simulation and analysis of three-level single-photon emitters."""

from photonstat.photophysics import (
    TABLE1,
    LevelPopulations,
    OscillatoryRegimeError,
    ParameterError,
    RateParams,
    SaturationParams,
    g2_analytic,
    g2_bin_average,
    max_emission_rate,
    propagate,
    rate_matrix,
    saturation_rate,
    steady_state,
    two_photon_correlator,
)

__version__ = "0.1.0"
