"""Frequency conversion stage and spectral filters acting on photon streams.

Transmission functions are deterministic; ``apply_filter`` realises any of
them on discrete photons by independent Bernoulli thinning.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .emitter import C_NM_GHZ, generate_background_stream
from .streams import ContractError, Origin, PhotonStream, merge_streams, require_sorted, substream

# sinc^2(u) = 1/2 at u = SINC2_HALF_MAX  (sinc(u) = sin(u)/u)
SINC2_HALF_MAX = 1.3915573782515103


@dataclass(frozen=True)
class ConversionSpec:
    length_L: float = 4.0  # cm
    normalized_efficiency_eta: float = 1.15  # 1/(W cm^2)
    max_total_efficiency: float = 0.32
    acceptance_fwhm: float = 54.6  # GHz
    input_center: float = 710.74  # nm
    # flat converter-noise rate per watt of pump; SNR ~22 at 150 mW for 188,400 s^-1 input
    noise_rate_per_watt: float = 18_000.0

    def __post_init__(self):
        for name in ("length_L", "normalized_efficiency_eta", "max_total_efficiency", "acceptance_fwhm", "input_center"):
            if not getattr(self, name) > 0:
                raise ContractError(f"{name} must be positive")
        if self.max_total_efficiency > 1:
            raise ContractError("max_total_efficiency must not exceed 1")
        if self.noise_rate_per_watt < 0:
            raise ContractError("noise_rate_per_watt must be non-negative")

    @property
    def optimal_power(self) -> float:
        """Pump power (W) of the first conversion maximum."""
        return (math.pi / 2) ** 2 / (self.normalized_efficiency_eta * self.length_L**2)


@dataclass(frozen=True)
class PumpConfig:
    wavelength: float = 1549.90  # nm
    power: float = 0.150  # W
    coherence_time_T2p: float = 1.6e5  # ps (0.16 us)

    def __post_init__(self):
        if self.power < 0:
            raise ContractError("pump power must be non-negative")
        if not self.wavelength > 0 or not self.coherence_time_T2p > 0:
            raise ContractError("pump wavelength and coherence time must be positive")

    def with_power(self, power: float) -> "PumpConfig":
        return PumpConfig(self.wavelength, power, self.coherence_time_T2p)


@dataclass(frozen=True)
class EtalonSpec:
    free_spectral_range: float = 1850.0  # GHz
    finesse: float = 42.0
    center_frequency: float = C_NM_GHZ / 710.74  # GHz

    def __post_init__(self):
        if not self.finesse > 1 or not self.free_spectral_range > 0:
            raise ContractError("etalon needs finesse > 1 and FSR > 0")


@dataclass(frozen=True)
class FbgSpec:
    center: float = 1312.714  # nm
    bandwidth: float = 0.755  # nm
    in_band_transmission: float = 10 ** (-0.1)  # -1 dB
    out_of_band_suppression: float = 1e-3

    def __post_init__(self):
        for p in (self.in_band_transmission, self.out_of_band_suppression):
            if not 0 <= p <= 1:
                raise ContractError("FBG transmissions must lie in [0, 1]")
        if self.out_of_band_suppression >= self.in_band_transmission:
            raise ContractError("FBG suppression must be below in-band transmission")


def dfg_output_wavelength(lambda_in, lambda_p):
    """Idler wavelength of difference-frequency generation: 1/out = 1/in - 1/p."""
    lambda_in = np.asarray(lambda_in, float)
    if np.any(lambda_in <= 0) or np.any(lambda_in >= lambda_p):
        raise ContractError("down-conversion needs 0 < lambda_in < lambda_p")
    out = 1.0 / (1.0 / lambda_in - 1.0 / lambda_p)
    return float(out) if out.ndim == 0 else out


def conversion_probability(pump: PumpConfig, spec: ConversionSpec, internal: bool = False) -> float:
    """Total conversion efficiency ``max_total * sin^2(sqrt(eta P) L)``.

    ``internal=True`` returns the bare sin^2 term.
    """
    s = math.sin(math.sqrt(spec.normalized_efficiency_eta * pump.power) * spec.length_L) ** 2
    return s if internal else spec.max_total_efficiency * s


def sinc2(u):
    return np.sinc(np.asarray(u, float) / np.pi) ** 2


def acceptance_transmission(detuning, spec: ConversionSpec):
    """sinc^2 phase-matching window; detuning in GHz."""
    a = SINC2_HALF_MAX / (spec.acceptance_fwhm / 2)
    return sinc2(a * np.asarray(detuning, float))


def etalon_transmission(detuning, spec: EtalonSpec):
    """Airy transmission of a lossless etalon; detuning in GHz from resonance."""
    coeff = (2 * spec.finesse / math.pi) ** 2
    return 1.0 / (1.0 + coeff * np.sin(math.pi * np.asarray(detuning, float) / spec.free_spectral_range) ** 2)


def etalon_mean_transmission(spec: EtalonSpec, band: tuple[float, float], samples: int = 400_001) -> float:
    """Average Airy transmission over a wavelength band, uniform in frequency."""
    nu = np.linspace(C_NM_GHZ / band[1], C_NM_GHZ / band[0], samples)
    return float(etalon_transmission(nu - spec.center_frequency, spec).mean())


def fbg_band_transmission(wavelength, spec: FbgSpec):
    """Flat-top band; the band edges belong to the passband.

    The edge test allows 1 fm of floating-point slack so that
    ``center + bandwidth / 2`` itself counts as in-band.
    """
    inside = np.abs(np.asarray(wavelength, float) - spec.center) <= spec.bandwidth / 2 + 1e-6
    return np.where(inside, spec.in_band_transmission, spec.out_of_band_suppression)


def detuning_ghz(wavelength, center_nm: float):
    return C_NM_GHZ / np.asarray(wavelength, float) - C_NM_GHZ / center_nm


def apply_filter(stream: PhotonStream, transmission, seed: int, name: str = "filter") -> PhotonStream:
    """Keep each event independently with its transmission probability.

    ``transmission`` is a scalar or a callable mapping the stream to an array
    of per-event probabilities.
    """
    require_sorted(stream)
    p = transmission(stream) if callable(transmission) else transmission
    p = np.broadcast_to(np.asarray(p, float), (len(stream),))
    if np.any(p < 0) or np.any(p > 1) or np.any(np.isnan(p)):
        raise ContractError("transmission values must lie in [0, 1]")
    rng = substream(seed, name)
    return stream.select(rng.random(len(stream)) < p)


def convert_stream(
    stream: PhotonStream,
    pump: PumpConfig,
    spec: ConversionSpec,
    duration: float,
    seed: int,
    fbg: FbgSpec | None = None,
) -> PhotonStream:
    """Frequency-convert a visible stream.

    Every event survives with conversion probability times the acceptance at
    its own detuning, is relabelled to the DFG output wavelength, then the
    optional FBG band filter acts on the output.  The FBG in-band loss is
    already part of ``max_total_efficiency``, so the FBG stage applies only
    its transmission relative to the passband.  Converter noise (flat
    Poisson rate proportional to pump power, uniform over the FBG band or the
    acceptance window) is merged in last.
    """
    require_sorted(stream)
    eta = conversion_probability(pump, spec)

    def t_conv(s):
        return eta * acceptance_transmission(detuning_ghz(s.wavelengths, spec.input_center), spec)

    kept = apply_filter(stream, t_conv, seed, "optics.convert")
    out = PhotonStream(
        kept.timestamps,
        dfg_output_wavelength(kept.wavelengths, pump.wavelength) if len(kept) else kept.wavelengths,
        kept.origins,
        kept.duration,
    )
    if fbg is not None:
        rel = lambda s: fbg_band_transmission(s.wavelengths, fbg) / fbg.in_band_transmission  # noqa: E731
        out = apply_filter(out, rel, seed, "optics.fbg")
    center_out = dfg_output_wavelength(spec.input_center, pump.wavelength)
    if fbg is not None:
        band = (fbg.center - fbg.bandwidth / 2, fbg.center + fbg.bandwidth / 2)
    else:
        half = spec.acceptance_fwhm / 2
        band = (C_NM_GHZ / (C_NM_GHZ / center_out + half), C_NM_GHZ / (C_NM_GHZ / center_out - half))
    noise = generate_background_stream(
        spec.noise_rate_per_watt * pump.power,
        band,
        duration,
        seed,
        origin=Origin.CONVERTER_NOISE,
        name="optics.noise",
    )
    return merge_streams(out, noise)


def converted_coherence_time(T2_in: float, T2_pump: float) -> float:
    """Coherence time after conversion when Lorentzian linewidths add."""
    if not (T2_in > 0 and T2_pump > 0):
        raise ContractError("coherence times must be positive")
    return 1.0 / (1.0 / T2_in + 1.0 / T2_pump)
