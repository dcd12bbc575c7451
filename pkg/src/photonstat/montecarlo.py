"""
Kinetic Monte Carlo of the three-level emitter and a two-detector HBT model.

The emitter is simulated as an exact continuous-time Markov jump process
(competing exponentials). Detection applies efficiency thinning, a 50/50
beamsplitter, Poissonian background, Gaussian jitter, per-channel dead time
and a fixed electronic delay on channel B.

Randomness is drawn from independent Philox substreams spawned from one
seed, so e.g. switching on jitter does not perturb the emitter trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numba as nb
import numpy as np

from photonstat.photophysics import ParameterError, RateParams

__all__ = [
    "EmitterConfig",
    "DetectorConfig",
    "PhotonStream",
    "CHANNEL_A",
    "CHANNEL_B",
    "GENERATOR_NAME",
    "substreams",
    "run_trajectory",
    "simulate_emission",
    "detect",
]

CHANNEL_A = 0
CHANNEL_B = 1
GENERATOR_NAME = "numpy.random.Philox"
PS = 1e-12

_UNIFORM_CHUNK = 1 << 22


@dataclass(frozen=True)
class EmitterConfig:
    rates: RateParams
    phi_F: float = 1.0
    duration: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not self.duration > 0:
            raise ParameterError(f"duration must be > 0, got {self.duration!r}")
        if not 0 < self.phi_F <= 1:
            raise ParameterError(f"phi_F must be in (0, 1], got {self.phi_F!r}")
        if not 0 <= self.seed < 2 ** 64:
            raise ParameterError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class DetectorConfig:
    efficiency: float = 1.0
    background_rate: float = 0.0
    dead_time: float = 0.0
    jitter_sigma: float = 0.0
    electronic_delay: float = 0.0

    def __post_init__(self):
        if not 0 <= self.efficiency <= 1:
            raise ParameterError(f"efficiency must be in [0, 1], got {self.efficiency!r}")
        for name in ("background_rate", "dead_time", "jitter_sigma"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ParameterError(f"{name} must be finite and >= 0, got {v!r}")
        if not math.isfinite(self.electronic_delay):
            raise ParameterError("electronic_delay must be finite")


@dataclass
class PhotonStream:
    """Time-ordered detection events of a two-channel HBT setup.

    Timestamps are stored as integer picoseconds; ``times`` gives seconds.
    """

    timestamps_ps: np.ndarray
    channels: np.ndarray
    duration: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.timestamps_ps = np.asarray(self.timestamps_ps, dtype=np.int64)
        self.channels = np.asarray(self.channels, dtype=np.uint8)
        if self.timestamps_ps.shape != self.channels.shape:
            raise ValueError("timestamps and channels must have equal length")
        if np.any(self.channels > CHANNEL_B):
            raise ValueError("channel must be 0 (A) or 1 (B)")

    def __len__(self):
        return self.timestamps_ps.size

    @property
    def times(self):
        return self.timestamps_ps * PS

    def channel_ps(self, channel):
        """Sorted picosecond timestamps of one channel."""
        return np.sort(self.timestamps_ps[self.channels == channel], kind="stable")

    def counts(self):
        n_b = int(np.count_nonzero(self.channels))
        return len(self) - n_b, n_b

    @classmethod
    def from_channels(cls, a_ps, b_ps, duration, metadata=None):
        a_ps = np.asarray(a_ps, dtype=np.int64)
        b_ps = np.asarray(b_ps, dtype=np.int64)
        t = np.concatenate([a_ps, b_ps])
        ch = np.concatenate([np.zeros(a_ps.size, np.uint8), np.ones(b_ps.size, np.uint8)])
        order = np.lexsort((ch, t))
        return cls(t[order], ch[order], float(duration), dict(metadata or {}))

    def __eq__(self, other):
        if not isinstance(other, PhotonStream):
            return NotImplemented
        return (np.array_equal(self.timestamps_ps, other.timestamps_ps)
                and np.array_equal(self.channels, other.channels)
                and self.duration == other.duration
                and self.metadata == other.metadata)


def substreams(seed, names):
    """Independent Philox generators, one per name, derived from ``seed``."""
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {n: np.random.Generator(np.random.Philox(c)) for n, c in zip(names, children)}


@nb.njit(cache=True)
def _kmc_kernel(u, state, t, t_end, k, g1, isc, g20, out, n_out, occ):
    """Advance the jump process using uniforms ``u``.

    Returns (state, t, n_used, n_out, finished). Spontaneous 1 -> 0 decays
    at t >= 0 are written to ``out``; time spent in each state after t = 0
    accumulates in ``occ``. Stops early when ``out`` is full or uniforms
    run short for the next jump.
    """
    n = u.size
    i = 0
    total1 = g1 + k + isc
    while True:
        if n_out >= out.size:
            return state, t, i, n_out, False
        if state == 0:
            rate = k
            need = 1
        elif state == 1:
            rate = total1
            need = 2
        else:
            rate = g20
            need = 1
        if rate <= 0.0:
            if t_end > t:
                _occupy(occ, state, t, t_end)
            return state, t_end, i, n_out, True
        if i + need > n:
            return state, t, i, n_out, False
        dt = -math.log1p(-u[i])
        dt /= rate
        t_next = t + dt
        if t_next >= t_end:
            _occupy(occ, state, t, t_end)
            return state, t_end, i + need, n_out, True
        _occupy(occ, state, t, t_next)
        t = t_next
        if state == 0:
            state = 1
        elif state == 1:
            x = u[i + 1] * total1
            if x < g1:
                state = 0
                if t >= 0.0:
                    out[n_out] = t
                    n_out += 1
            elif x < g1 + k:
                state = 0
            else:
                state = 2
        else:
            state = 0
        i += need


@nb.njit(cache=True, inline="always")
def _occupy(occ, state, t0, t1):
    if t1 > 0.0:
        occ[state] += t1 - max(t0, 0.0)


def run_trajectory(rates, duration, rng, burn_in=None):
    """Simulate the jump process on [-burn_in, duration] from the ground state.

    Returns
    -------
    decays : ndarray
        Times [s] of spontaneous 1 -> 0 decays in [0, duration).
    occupancy : ndarray, shape (3,)
        Time spent in states 0, 1, 2 during [0, duration].
    """
    if burn_in is None:
        burn_in = 100.0 / rates.gamma20 if rates.gamma20 > 0 else 0.0
    expected = 1.2 * rates.inv_T1 * duration * 0.6 + 1024
    out = np.empty(int(min(expected, 5e8)))
    occ = np.zeros(3)
    state, t, n_out = 0, -float(burn_in), 0
    leftover = np.empty(0)
    while True:
        u = np.concatenate([leftover, rng.random(_UNIFORM_CHUNK)])
        state, t, used, n_out, done = _kmc_kernel(
            u, state, t, float(duration), rates.k, rates.inv_T1, rates.gamma12,
            rates.gamma20, out, n_out, occ)
        if done:
            break
        leftover = u[used:]
        if n_out >= out.size:
            out = np.concatenate([out, np.empty(out.size)])
    return out[:n_out].copy(), occ


def simulate_emission(config, burn_in=None):
    """Emission times [s] of radiative spontaneous decays, ascending.

    Only spontaneous decays can yield a photon; each does so with
    probability ``phi_F``. Deterministic for a given ``config.seed``.
    """
    rng = substreams(config.seed, ("trajectory", "radiative"))
    decays, _ = run_trajectory(config.rates, config.duration, rng["trajectory"], burn_in)
    if config.phi_F < 1:
        decays = decays[rng["radiative"].random(decays.size) < config.phi_F]
    return decays


@nb.njit(cache=True)
def _dead_time_mask(t, dead):
    keep = np.zeros(t.size, dtype=np.bool_)
    last = -np.inf
    for i in range(t.size):
        if t[i] - last >= dead:
            keep[i] = True
            last = t[i]
    return keep


def detect(emissions, det, seed, duration, metadata=None):
    """Pass emission times through the HBT detection chain.

    Parameters
    ----------
    emissions : array_like
        Ascending emission times [s].
    det : DetectorConfig
    seed : int
        Seed for the detection substreams.
    duration : float
        Acquisition time [s]; background is generated on [0, duration).

    Returns
    -------
    PhotonStream
    """
    emissions = np.asarray(emissions, dtype=float)
    rng = substreams(seed, ("efficiency", "routing", "background", "jitter"))
    kept = emissions[rng["efficiency"].random(emissions.size) < det.efficiency]
    to_b = rng["routing"].random(kept.size) < 0.5
    channels = []
    for ch, sel in ((CHANNEL_A, ~to_b), (CHANNEL_B, to_b)):
        n_bg = rng["background"].poisson(0.5 * det.background_rate * duration)
        bg = rng["background"].random(n_bg) * duration
        t = np.concatenate([kept[sel], bg])
        if det.jitter_sigma > 0:
            t = t + rng["jitter"].normal(0.0, det.jitter_sigma, t.size)
        t = np.sort(t[(t >= 0) & (t < duration)])
        if det.dead_time > 0:
            t = t[_dead_time_mask(t, det.dead_time)]
        t_ps = np.rint(t / PS).astype(np.int64)
        if ch == CHANNEL_B:
            t_ps = t_ps + int(round(det.electronic_delay / PS))
            t_ps = t_ps[t_ps >= 0]
        channels.append(t_ps)
    meta = {
        "generator": GENERATOR_NAME,
        "detect_seed": int(seed),
        "efficiency": det.efficiency,
        "background_rate": det.background_rate,
        "dead_time": det.dead_time,
        "jitter_sigma": det.jitter_sigma,
        "electronic_delay": det.electronic_delay,
    }
    meta.update(metadata or {})
    return PhotonStream.from_channels(channels[0], channels[1], duration, meta)
