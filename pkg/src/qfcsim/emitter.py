"""Seeded photon streams of a pulsed quantum-dot single-photon source."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .streams import (
    MAX_EVENTS,
    PS_PER_S,
    CapacityError,
    ContractError,
    Origin,
    PhotonStream,
    substream,
)

C_NM_GHZ = 299_792_458.0  # c in nm*GHz


@dataclass(frozen=True)
class SpectralLine:
    center_wavelength: float  # nm
    relative_intensity: float = 1.0
    label: str = "X"

    def __post_init__(self):
        if self.relative_intensity <= 0:
            raise ContractError("spectral line weight must be positive")
        if not 690.0 <= self.center_wavelength <= 715.0:
            raise ContractError(f"line at {self.center_wavelength} nm outside the 690-715 nm source band")


EXCITON = SpectralLine(710.74, 1.0, "X")
# biexciton sits 1.45 nm from the exciton (3.54 meV)
BIEXCITON = SpectralLine(710.74 - 1.45, 0.6, "XX")


@dataclass(frozen=True)
class EmitterConfig:
    """Pulsed emitter parameters.  Times in ps, rates in Hz / s^-1.

    ``emission_prob`` defaults to ``collected_rate_target / rep_rate``, which
    lumps every collection loss into one Bernoulli factor per pulse.

    ``recovery_time`` sets how quickly the emitter can emit again after a
    photon: a photon that follows the previous emitted photon by ``dt``
    survives with probability ``1 - exp(-dt / recovery_time)``.  This carves
    the antibunching notch at zero delay; 0 disables it.
    """

    rep_rate: float = 80e6
    emission_prob: float | None = None
    lifetime_fast: float = 2600.0
    refill_tau: float = 2.5e6
    refill_weight: float = 0.275
    coherence_time_T2: float = 42.0
    lines: tuple[SpectralLine, ...] = (EXCITON,)
    background_rate: float = 188_400.0 / 7.0
    collected_rate_target: float = 188_400.0
    recovery_time: float = 380.0
    # covers the etalon order at the exciton line and the next order to the blue
    background_band: tuple[float, float] = (706.09, 712.30)

    def __post_init__(self):
        if self.emission_prob is None:
            object.__setattr__(self, "emission_prob", self.collected_rate_target / self.rep_rate)
        object.__setattr__(self, "lines", tuple(self.lines))
        object.__setattr__(self, "background_band", tuple(float(x) for x in self.background_band))
        for name in ("rep_rate", "lifetime_fast", "refill_tau", "coherence_time_T2", "collected_rate_target"):
            if not getattr(self, name) > 0:
                raise ContractError(f"{name} must be strictly positive")
        if not 0.0 <= self.emission_prob <= 1.0:
            raise ContractError("emission_prob must lie in [0, 1]")
        if not 0.0 <= self.refill_weight <= 1.0:
            raise ContractError("refill_weight must lie in [0, 1]")
        if self.lifetime_fast >= self.refill_tau:
            raise ContractError("lifetime_fast must be shorter than refill_tau")
        if self.background_rate < 0 or self.recovery_time < 0:
            raise ContractError("background_rate and recovery_time must be non-negative")
        if not self.lines:
            raise ContractError("at least one spectral line is required")
        lo, hi = self.background_band
        if not 0 < lo < hi:
            raise ContractError("background_band must be (lo, hi) with 0 < lo < hi")

    @property
    def period_ps(self) -> float:
        return PS_PER_S / self.rep_rate

    @property
    def mean_delay(self) -> float:
        w = self.refill_weight
        return (1 - w) * self.lifetime_fast + w * self.refill_tau

    def line_weights(self) -> np.ndarray:
        w = np.array([ln.relative_intensity for ln in self.lines], float)
        return w / w.sum()


def sample_emission_delay(config: EmitterConfig, rng: np.random.Generator, size=None):
    """Draw emission delays (ps) from the fast-decay / refilling mixture."""
    slow = rng.random(size) < config.refill_weight
    tau = np.where(slow, config.refill_tau, config.lifetime_fast)
    delay = rng.exponential(1.0, size) * tau
    return float(delay) if size is None else delay


def _emitting_pulses(n_first: int, n_last: int, p: float, rng: np.random.Generator, cap: int) -> np.ndarray:
    """Indices in [n_first, n_last) of pulses that emit, as a Bernoulli(p) process."""
    n = n_last - n_first
    if n <= 0 or p == 0.0:
        return np.empty(0, np.int64)
    if n * p > cap:
        raise CapacityError(f"expected {n * p:.3g} events exceeds the cap of {cap}")
    if p == 1.0:
        return np.arange(n_first, n_last, dtype=np.int64)
    # geometric gaps between successes realise the Bernoulli process in O(events)
    chunks = []
    pos = -1
    batch = int(n * p * 1.05 + 10 * math.sqrt(n * p) + 16)
    while pos < n:
        gaps = rng.geometric(p, batch).astype(np.int64)
        idx = pos + np.cumsum(gaps)
        chunks.append(idx)
        pos = int(idx[-1])
    idx = np.concatenate(chunks)
    return idx[idx < n] + n_first


@numba.njit(cache=True)
def _recovery_mask(ts, u, recovery):
    keep = np.ones(ts.size, np.bool_)
    last = -(1 << 62)
    for i in range(ts.size):
        dt = ts[i] - last
        if u[i] < math.exp(-dt / recovery):
            keep[i] = False
        else:
            last = ts[i]
    return keep


def generate_signal_stream(
    config: EmitterConfig,
    duration: float,
    seed: int,
    *,
    with_pulses: bool = False,
    max_events: int = MAX_EVENTS,
):
    """Single-photon stream over ``[0, duration]`` (duration in s).

    Each excitation pulse emits at most one photon.  Pulses before t=0 are
    simulated for a warm-up span of ten refilling constants so that the slow
    tail is already stationary at t=0.  With ``with_pulses`` the originating
    pulse index of every event is returned as a second value.
    """
    if not duration > 0:
        raise ContractError("duration must be positive")
    rng = substream(seed, "emitter.signal")
    period = config.period_ps
    dur_ps = int(round(duration * PS_PER_S))
    warmup = 10.0 * config.refill_tau if config.refill_weight > 0 else 10.0 * config.lifetime_fast
    n_first = -int(math.ceil(warmup / period))
    n_last = int(math.floor(dur_ps / period)) + 1
    pulses = _emitting_pulses(n_first, n_last, config.emission_prob, rng, max_events)
    n = pulses.size
    delays = sample_emission_delay(config, rng, n)
    line_idx = rng.choice(len(config.lines), size=n, p=config.line_weights())
    ts = np.rint(pulses * period + delays).astype(np.int64)
    inside = (ts >= 0) & (ts <= dur_ps)
    ts, pulses, line_idx = ts[inside], pulses[inside], line_idx[inside]
    order = np.argsort(ts, kind="stable")
    ts, pulses, line_idx = ts[order], pulses[order], line_idx[order]
    if config.recovery_time > 0 and ts.size:
        keep = _recovery_mask(ts, rng.random(ts.size), float(config.recovery_time))
        ts, pulses, line_idx = ts[keep], pulses[keep], line_idx[keep]
    centers = np.array([ln.center_wavelength for ln in config.lines])
    stream = PhotonStream(ts, centers[line_idx], np.full(ts.size, Origin.SIGNAL, np.uint8), dur_ps)
    if with_pulses:
        return stream, pulses
    return stream


def generate_background_stream(
    rate: float,
    wavelength_band: tuple[float, float],
    duration: float,
    seed: int,
    *,
    spectrum=None,
    origin: Origin = Origin.BACKGROUND,
    name: str = "emitter.background",
    max_events: int = MAX_EVENTS,
) -> PhotonStream:
    """Homogeneous Poisson stream of uncorrelated photons.

    Wavelengths are uniform in optical frequency over the band, or follow
    ``spectrum(wavelength_nm)`` (a non-negative weight, e.g. a filter
    transmission) sampled by inverse CDF on a fine frequency grid.
    """
    if rate < 0:
        raise ContractError("rate must be non-negative")
    if not duration > 0:
        raise ContractError("duration must be positive")
    dur_ps = int(round(duration * PS_PER_S))
    if rate == 0:
        return PhotonStream.empty(dur_ps)
    if rate * duration > max_events:
        raise CapacityError(f"expected {rate * duration:.3g} events exceeds the cap of {max_events}")
    rng = substream(seed, name)
    n = rng.poisson(rate * duration)
    ts = np.sort(np.rint(rng.random(n) * dur_ps).astype(np.int64))
    lo, hi = wavelength_band
    nu_lo, nu_hi = C_NM_GHZ / hi, C_NM_GHZ / lo
    if spectrum is None:
        nu = rng.uniform(nu_lo, nu_hi, n)
    else:
        grid = np.linspace(nu_lo, nu_hi, 200_001)
        cdf = np.concatenate([[0.0], np.cumsum(np.asarray(spectrum(C_NM_GHZ / grid[1:]), float))])
        if not cdf[-1] > 0:
            raise ContractError("background spectrum vanishes over the band")
        nu = np.interp(rng.random(n) * cdf[-1], cdf, grid)
    return PhotonStream(ts, C_NM_GHZ / nu, np.full(n, origin, np.uint8), dur_ps)
