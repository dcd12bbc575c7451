"""
Coincidence histograms for two-channel photon streams.

Delays are Δ = t_B - t_A. Histograms work on integer picoseconds so that
binning is exact; bins are left-closed, right-open.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import warnings

import numba as nb
import numpy as np

from photonstat.montecarlo import CHANNEL_A, CHANNEL_B, PS

__all__ = [
    "CoincidenceHistogram",
    "NormalizationError",
    "EmptyChannelWarning",
    "LOW_COUNTS",
    "start_stop_histogram",
    "full_correlation_histogram",
    "normalize",
    "background_correct",
    "background_contrast",
]

LOW_COUNTS = 10


class NormalizationError(ValueError):
    pass


class EmptyChannelWarning(UserWarning):
    pass


@dataclass
class CoincidenceHistogram:
    """Binned A-B coincidences plus what is needed to normalise them.

    ``bin_width`` and ``delay_min`` are in seconds. ``g2`` and ``g2_err``
    are filled by :func:`normalize`.
    """

    bin_width: float
    delay_min: float
    counts: np.ndarray
    n_starts: int
    n_stops: int
    total_time: float
    g2: np.ndarray | None = None
    g2_err: np.ndarray | None = None
    empty: bool = False
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if np.any(self.counts < 0):
            raise ValueError("counts must be >= 0")
        if self.g2 is not None and len(self.g2) != len(self.counts):
            raise ValueError("g2 length must equal counts length")

    @property
    def n_bins(self):
        return self.counts.size

    @property
    def edges(self):
        return self.delay_min + self.bin_width * np.arange(self.n_bins + 1)

    @property
    def left_edges(self):
        return self.edges[:-1]

    @property
    def centers(self):
        return self.delay_min + self.bin_width * (np.arange(self.n_bins) + 0.5)

    @property
    def low_statistics(self):
        return self.counts < LOW_COUNTS

    @property
    def normalized(self):
        return self.g2 is not None

    def shifted(self, offset):
        """Same histogram with the delay axis moved by ``-offset``.

        Use ``hist.shifted(electronic_delay)`` to centre the dip at zero.
        """
        return replace(self, delay_min=self.delay_min - offset)

    def __add__(self, other):
        if (self.bin_width, self.delay_min, self.n_bins) != (other.bin_width, other.delay_min, other.n_bins):
            raise ValueError("histograms must share binning to be merged")
        return CoincidenceHistogram(
            self.bin_width, self.delay_min, self.counts + other.counts,
            self.n_starts + other.n_starts, self.n_stops + other.n_stops,
            self.total_time + other.total_time)


def _to_ps(x):
    return int(round(x / PS))


def _binning(bin_width, lo, hi):
    w = _to_ps(bin_width)
    if w <= 0:
        raise ValueError("bin_width must be at least 1 ps")
    lo_ps = _to_ps(lo)
    n = int(np.ceil((_to_ps(hi) - lo_ps) / w))
    if n <= 0:
        raise ValueError("empty delay range")
    return w, lo_ps, n


@nb.njit(cache=True)
def _start_stop_kernel(a, b, lo, w, n):
    counts = np.zeros(n, dtype=np.int64)
    j = 0
    nb_ = b.size
    for i in range(a.size):
        while j < nb_ and b[j] < a[i]:
            j += 1
        if j == nb_:
            break
        d = b[j] - a[i] - lo
        if d >= 0:
            k = d // w
            if k < n:
                counts[k] += 1
    return counts


@nb.njit(cache=True)
def _full_kernel(a, b, lo, hi, w, n):
    # pairs with lo <= Δ <= hi; Δ == hi goes into the last bin
    counts = np.zeros(n, dtype=np.int64)
    j0 = 0
    nb_ = b.size
    for i in range(a.size):
        ta = a[i]
        while j0 < nb_ and b[j0] - ta < lo:
            j0 += 1
        j = j0
        while j < nb_:
            d = b[j] - ta
            if d > hi:
                break
            k = (d - lo) // w
            if k >= n:
                k = n - 1
            counts[k] += 1
            j += 1
    return counts


@nb.njit(cache=True, parallel=True)
def _full_kernel_parallel(a, b, lo, hi, w, n, n_chunks):
    # independent slices of the start channel, summed at the end
    bounds = np.linspace(0, a.size, n_chunks + 1).astype(np.int64)
    partial = np.zeros((n_chunks, n), dtype=np.int64)
    for c in nb.prange(n_chunks):
        partial[c] = _full_kernel(a[bounds[c]:bounds[c + 1]], b, lo, hi, w, n)
    return partial.sum(axis=0)


def _channels(stream):
    a = stream.channel_ps(CHANNEL_A)
    b = stream.channel_ps(CHANNEL_B)
    empty = a.size == 0 or b.size == 0
    if empty:
        warnings.warn("a channel of the photon stream is empty", EmptyChannelWarning, stacklevel=3)
    return a, b, empty


def start_stop_histogram(stream, bin_width=0.5e-9, delay_range=(0.0, 400e-9)):
    """Histogram of delays from each A event to the next B event.

    Every A event is a start, whether or not its stop lands in range.
    """
    w, lo, n = _binning(bin_width, *delay_range)
    a, b, empty = _channels(stream)
    counts = _start_stop_kernel(a, b, lo, w, n)
    return CoincidenceHistogram(w * PS, lo * PS, counts, a.size, b.size, stream.duration,
                                empty=empty, metadata={"mode": "startstop"})


def full_correlation_histogram(stream, bin_width=0.5e-9, max_delay=200e-9, center=0.0):
    """Histogram of all A-B pairs with |Δ - center| <= max_delay.

    The window [center - max_delay, center + max_delay] is split into bins
    of ``bin_width``; the last bin is closed on the right.
    """
    w, lo, n = _binning(bin_width, center - max_delay, center + max_delay)
    hi = _to_ps(center + max_delay)
    a, b, empty = _channels(stream)
    # only start the threading layer when more than one thread is configured
    threads = nb.get_num_threads() if nb.config.NUMBA_NUM_THREADS > 1 else 1
    if threads > 1 and a.size > 100_000:
        counts = _full_kernel_parallel(a, b, lo, hi, w, n, threads)
    else:
        counts = _full_kernel(a, b, lo, hi, w, n)
    return CoincidenceHistogram(w * PS, lo * PS, counts, a.size, b.size, stream.duration,
                                empty=empty, metadata={"mode": "full"})


def normalize(hist):
    """Attach g2 = counts / (N_A N_B w T) and its Poisson standard error."""
    if not (hist.n_starts > 0 and hist.n_stops > 0 and hist.total_time > 0 and hist.bin_width > 0):
        raise NormalizationError("normalisation needs nonzero channel counts, duration and bin width")
    T = hist.total_time
    denom = (hist.n_starts / T) * (hist.n_stops / T) * hist.bin_width * T
    return replace(hist, g2=hist.counts / denom, g2_err=np.sqrt(hist.counts) / denom)


def _signal_fraction(rho):
    rho = np.asarray(rho, dtype=float)
    if not np.all((rho > 0) & (rho <= 1)):
        raise ValueError(f"signal_fraction must be in (0, 1], got {rho!r}")
    return rho


def background_contrast(g2_true, signal_fraction):
    """g2 measured in presence of uncorrelated background."""
    rho = _signal_fraction(signal_fraction)
    return 1.0 + rho * rho * (np.asarray(g2_true) - 1.0)


def background_correct(g2_measured, signal_fraction):
    """Remove uncorrelated background from a measured g2.

    ``signal_fraction`` is S / (S + B) for signal rate S and background B.
    """
    rho = _signal_fraction(signal_fraction)
    return (np.asarray(g2_measured) - (1.0 - rho * rho)) / (rho * rho)
