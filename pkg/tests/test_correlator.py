import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from photonstat.correlator import (
    CoincidenceHistogram,
    EmptyChannelWarning,
    NormalizationError,
    background_contrast,
    background_correct,
    full_correlation_histogram,
    normalize,
    start_stop_histogram,
)
from photonstat.montecarlo import PhotonStream
from photonstat.photophysics import TABLE1, g2_bin_average

PS = 1e-12


def brute_force_pairs(a, b, lo, hi, w, n):
    """O(n^2) reference: every A-B pair with lo <= Δ <= hi (ps)."""
    d = (b[None, :] - a[:, None]).ravel()
    d = d[(d >= lo) & (d <= hi)]
    k = np.minimum((d - lo) // w, n - 1)
    return np.bincount(k, minlength=n)


def poisson_stream(rng, rate_a, rate_b, T):
    a = np.sort(rng.random(rng.poisson(rate_a * T)) * T)
    b = np.sort(rng.random(rng.poisson(rate_b * T)) * T)
    return PhotonStream.from_channels(np.rint(a / PS), np.rint(b / PS), T)


def test_single_pair_start_stop():
    s = PhotonStream.from_channels([1000], [4000], 1e-6)
    h = start_stop_histogram(s, 1e-9, (0.0, 10e-9))
    assert h.counts.tolist() == [0, 0, 0, 1, 0, 0, 0, 0, 0, 0]
    assert h.edges[3] == pytest.approx(3e-9)


def test_full_counts_every_pair_once():
    s = PhotonStream.from_channels([0, 2000], [1000, 5000], 1e-6)
    h = full_correlation_histogram(s, 1e-9, 10e-9)
    assert h.counts.sum() == 4
    # Δ = 1, 5, -1, 3 ns
    for d in (1, 5, -1, 3):
        k = int((d + 10) // 1)
        assert h.counts[k] >= 1


def test_start_stop_uses_next_stop_only():
    s = PhotonStream.from_channels([0], [1000, 2000, 3000], 1e-6)
    h = start_stop_histogram(s, 1e-9, (0.0, 10e-9))
    assert h.counts.sum() == 1 and h.counts[1] == 1
    assert h.n_starts == 1 and h.n_stops == 3


def test_empty_channel_flagged():
    s = PhotonStream.from_channels([0, 10], [], 1e-6)
    with pytest.warns(EmptyChannelWarning):
        h = start_stop_histogram(s)
    assert h.empty and h.counts.sum() == 0
    with pytest.warns(EmptyChannelWarning):
        assert full_correlation_histogram(s).empty
    with pytest.raises(NormalizationError):
        normalize(h)


def test_full_matches_brute_force(rng):
    for _ in range(25):
        T = rng.uniform(1e-6, 1e-5)
        s = poisson_stream(rng, rng.uniform(1e8, 5e8), rng.uniform(1e8, 5e8), T)
        w = int(rng.integers(100, 3000))
        max_d = int(rng.integers(5_000, 200_000))
        h = full_correlation_histogram(s, w * PS, max_d * PS)
        n = h.n_bins
        ref = brute_force_pairs(s.channel_ps(0), s.channel_ps(1), -max_d, max_d, w, n)
        assert np.array_equal(h.counts, ref)


def test_start_stop_never_exceeds_full(rng):
    s = poisson_stream(rng, 5e7, 5e7, 1e-4)
    ss = start_stop_histogram(s, 1e-9, (-100e-9, 100e-9))
    full = full_correlation_histogram(s, 1e-9, 100e-9)
    assert np.array_equal(ss.edges, full.edges)
    assert np.all(ss.counts <= full.counts)


def test_start_stop_exponential_for_poisson(rng):
    # independent Poisson channels: next stop is exponential with rate N_B
    T, ra, rb = 0.05, 2e5, 1e6
    s = poisson_stream(rng, ra, rb, T)
    h = start_stop_histogram(s, 0.2e-6, (0.0, 5e-6))
    nb = h.n_stops / T
    e = h.edges
    expected = h.n_starts * (np.exp(-nb * e[:-1]) - np.exp(-nb * e[1:]))
    z = (h.counts - expected) / np.sqrt(expected)
    assert np.all(np.abs(z) < 5)
    assert abs(np.mean(z ** 2) - 1) < 0.5


def test_full_flat_for_poisson(rng):
    T, ra, rb = 0.05, 1e6, 1e6
    s = poisson_stream(rng, ra, rb, T)
    h = full_correlation_histogram(s, 1e-9, 50e-9)
    expected = (h.n_starts / T) * (h.n_stops / T) * h.bin_width * T
    z = (h.counts - expected) / np.sqrt(expected)
    assert np.all(np.abs(z) < 4)
    g = normalize(h)
    assert np.mean(g.g2) == pytest.approx(1.0, abs=3 * np.sqrt(1 / h.counts.sum()))


def test_start_stop_and_full_agree_at_low_rate(table1_emissions):
    from photonstat.montecarlo import DetectorConfig, detect
    # count rate x window ~ 0.005
    s = detect(table1_emissions, DetectorConfig(efficiency=0.02, electronic_delay=50e-9), 3, 0.05)
    ss = start_stop_histogram(s, 5e-9, (0.0, 200e-9))
    full = full_correlation_histogram(s, 5e-9, 100e-9, center=100e-9)
    assert np.array_equal(ss.edges, full.edges)
    sigma = np.sqrt(np.maximum(full.counts, 1))
    assert np.all(np.abs(full.counts - ss.counts) <= 3 * sigma)


def test_dip_at_electronic_delay(table1_emissions):
    from photonstat.montecarlo import DetectorConfig, detect
    s = detect(table1_emissions, DetectorConfig(electronic_delay=50e-9), 3, 0.05)
    h = normalize(full_correlation_histogram(s, 0.5e-9, 200e-9, center=50e-9))
    i = np.argmin(h.g2)
    assert h.centers[i] == pytest.approx(50e-9, abs=0.5e-9)
    # a 0.5 ns bin adjacent to zero delay averages g2 over [0, 0.5] ns
    expected = g2_bin_average(TABLE1, 0.0, 0.5e-9)
    assert abs(h.g2[i] - expected) < 5 * h.g2_err[i]
    assert h.g2.max() > 1.5
    ss = start_stop_histogram(s, 0.5e-9, (0.0, 100e-9))
    assert ss.centers[np.argmin(ss.counts[:200])] == pytest.approx(50e-9, abs=0.5e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(-400, 400))
def test_delay_shift_equivariance(seed, shift_bins):
    rng = np.random.default_rng(seed)
    T = 2e-6
    s = poisson_stream(rng, 3e8, 3e8, T)
    w_ps = 500
    d = shift_bins * w_ps
    shifted = PhotonStream.from_channels(s.channel_ps(0), s.channel_ps(1) + d, T)
    f0 = full_correlation_histogram(s, w_ps * PS, 100e-9)
    f1 = full_correlation_histogram(shifted, w_ps * PS, 100e-9, center=d * PS)
    assert np.array_equal(f0.counts, f1.counts)
    assert f1.delay_min == pytest.approx(f0.delay_min + d * PS, abs=1e-15)
    s0 = start_stop_histogram(s, w_ps * PS, (0.0, 100e-9))
    s1 = start_stop_histogram(shifted, w_ps * PS, (d * PS, 100e-9 + d * PS))
    # start-stop pairing is only shift-invariant if no stop can overtake its start
    a, b = s.channel_ps(0), s.channel_ps(1)
    overtaken = np.any(np.searchsorted(b, a - d) < np.searchsorted(b, a))
    if d >= 0 and not overtaken:
        assert np.array_equal(s0.counts, s1.counts)


def test_start_stop_shift_equivariance_sparse():
    a = np.arange(100) * 1_000_000
    b = a + 20_000 + (np.arange(100) % 7) * 1000
    s = PhotonStream.from_channels(a, b, 1e-4)
    for d in (0, 500, 5000, 15_000):
        shifted = PhotonStream.from_channels(a, b + d, 1e-4)
        h0 = start_stop_histogram(s, 0.5e-9, (0.0, 100e-9))
        h1 = start_stop_histogram(shifted, 0.5e-9, (d * PS, 100e-9 + d * PS))
        assert np.array_equal(h0.counts, h1.counts)


def test_normalize_values_and_errors():
    h = CoincidenceHistogram(1e-9, 0.0, np.array([0, 4, 100]), 1000, 2000, 1.0)
    g = normalize(h)
    denom = 1000 * 2000 * 1e-9
    np.testing.assert_allclose(g.g2, [0, 4 / denom, 100 / denom])
    np.testing.assert_allclose(g.g2_err, [0, 2 / denom, 10 / denom])
    assert g.low_statistics.tolist() == [True, True, False]
    with pytest.raises(NormalizationError):
        normalize(CoincidenceHistogram(1e-9, 0.0, np.array([1]), 10, 10, 0.0))


def test_histograms_merge_additively(rng):
    s1, s2 = poisson_stream(rng, 1e8, 1e8, 1e-5), poisson_stream(rng, 1e8, 1e8, 1e-5)
    h = full_correlation_histogram(s1, 1e-9, 20e-9) + full_correlation_histogram(s2, 1e-9, 20e-9)
    assert h.counts.sum() == (full_correlation_histogram(s1, 1e-9, 20e-9).counts.sum()
                              + full_correlation_histogram(s2, 1e-9, 20e-9).counts.sum())
    assert h.total_time == pytest.approx(2e-5)


def test_background_correction_identity_and_example():
    g = np.linspace(0, 2.5, 11)
    np.testing.assert_array_equal(background_correct(g, 1.0), g)
    assert background_contrast(0.0, 0.9) == pytest.approx(0.19, abs=1e-15)
    assert background_correct(0.19, 0.9) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        background_correct(0.5, 0.0)


@settings(max_examples=200)
@given(st.floats(0, 5), st.floats(0.01, 1.0))
def test_background_round_trip(g_true, rho):
    assert background_correct(background_contrast(g_true, rho), rho) == pytest.approx(g_true, abs=1e-12 / rho ** 2)
