"""Scenario files: TOML text whose sections mirror the config dataclasses.

Unknown sections or keys are rejected so that every experiment is fully
described by its file.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..detection import SI_APD, SSPD, DetectorSpec
from ..emitter import EmitterConfig, SpectralLine
from ..optics import ConversionSpec, EtalonSpec, FbgSpec, PumpConfig
from ..streams import ContractError
from ..tcspc import CorrelationConfig

KINDS = ("hbt_visible", "hbt_converted", "hbt_cross", "michelson", "lifetime", "efficiency_sweep")


class ScenarioError(ContractError):
    """Malformed or inconsistent scenario description."""


@dataclass(frozen=True)
class Scenario:
    kind: str
    duration: float = 1.0  # s per acquisition block
    seed: int = 0
    name: str = ""
    blocks: int = 1  # independent acquisitions, each with its own derived seed
    # Monte Carlo acceleration: multiplies every event rate (emitter
    # brightness, background, converter noise, dark counts).  All rate ratios
    # and every normalised correlation are unchanged; only the statistics
    # per simulated second improve.
    rate_scale: float = 1.0
    mode: str = "visible"  # michelson / lifetime branch: visible | converted
    emitter: EmitterConfig = field(default_factory=EmitterConfig)
    pump: PumpConfig = field(default_factory=PumpConfig)
    conversion: ConversionSpec = field(default_factory=ConversionSpec)
    etalon: EtalonSpec | None = field(default_factory=EtalonSpec)
    fbg: FbgSpec | None = field(default_factory=FbgSpec)
    detector_a: DetectorSpec | None = None
    detector_b: DetectorSpec | None = None
    correlation: CorrelationConfig = field(default_factory=CorrelationConfig)
    fine_bin: int | None = None  # hbt: extra fine-resolution correlation (ps)
    fine_window: int = 20_000
    arm_delay: int = 100_000  # hbt_cross extra path delay of the converted arm (ps)
    delays: tuple[float, ...] = ()  # michelson arm delays (ps)
    phase_steps: int = 16
    interferometer_transmission: float = 1.0
    powers: tuple[float, ...] = ()  # efficiency_sweep pump powers (W)
    lifetime_bin: int = 50  # ps
    lifetime_split: float = 50_000.0  # ps; coarser bins beyond this delay
    lifetime_coarse_factor: int = 200
    lifetime_fit_start: float = 1_000.0  # ps

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ScenarioError(f"unknown scenario kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if not self.duration > 0:
            raise ScenarioError("duration must be positive")
        if self.blocks < 1:
            raise ScenarioError("blocks must be at least 1")
        if self.mode not in ("visible", "converted"):
            raise ScenarioError("mode must be 'visible' or 'converted'")
        if not self.rate_scale > 0:
            raise ScenarioError("rate_scale must be positive")
        if self.emitter.emission_prob * self.rate_scale > 1:
            raise ScenarioError("rate_scale pushes the emission probability above 1")
        if self.kind == "michelson" and not self.delays:
            raise ScenarioError("michelson scenario needs a non-empty delay list")
        if self.kind == "efficiency_sweep" and not self.powers:
            raise ScenarioError("efficiency_sweep scenario needs a non-empty power list")
        if self.phase_steps < 8:
            raise ScenarioError("phase_steps must be at least 8")
        object.__setattr__(self, "delays", tuple(float(d) for d in self.delays))
        object.__setattr__(self, "powers", tuple(float(p) for p in self.powers))
        a, b = self.default_detectors()
        if self.detector_a is None:
            object.__setattr__(self, "detector_a", a)
        if self.detector_b is None:
            object.__setattr__(self, "detector_b", b)

    def default_detectors(self) -> tuple[DetectorSpec, DetectorSpec]:
        if self.kind == "hbt_visible":
            return SI_APD, SI_APD
        if self.kind == "hbt_converted":
            return SSPD, SSPD
        if self.kind == "hbt_cross":
            return SI_APD, SSPD
        det = SI_APD if self.mode == "visible" else SSPD
        return det, det

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    def scaled(self) -> "Scenario":
        """Copy with ``rate_scale`` folded into every rate (and reset to 1)."""
        k = self.rate_scale
        if k == 1:
            return self
        em = dataclasses.replace(
            self.emitter,
            emission_prob=self.emitter.emission_prob * k,
            background_rate=self.emitter.background_rate * k,
        )
        conv = dataclasses.replace(self.conversion, noise_rate_per_watt=self.conversion.noise_rate_per_watt * k)
        da = dataclasses.replace(self.detector_a, dark_rate=self.detector_a.dark_rate * k)
        db = dataclasses.replace(self.detector_b, dark_rate=self.detector_b.dark_rate * k)
        return dataclasses.replace(self, emitter=em, conversion=conv, detector_a=da, detector_b=db, rate_scale=1.0)

    def to_dict(self) -> dict:
        """Plain nested dict in scenario-file layout (for report echoes)."""
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if dataclasses.is_dataclass(v):
                v = {g.name: _plain(getattr(v, g.name)) for g in dataclasses.fields(v)}
            out[f.name] = _plain(v)
        return out


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    if dataclasses.is_dataclass(v):
        return {g.name: _plain(getattr(v, g.name)) for g in dataclasses.fields(v)}
    return v


_SECTIONS = {
    "emitter": EmitterConfig,
    "pump": PumpConfig,
    "conversion": ConversionSpec,
    "etalon": EtalonSpec,
    "fbg": FbgSpec,
    "detector_a": DetectorSpec,
    "detector_b": DetectorSpec,
    "correlation": CorrelationConfig,
}


def _build(cls, table: dict, where: str, base=None):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(table) - names)
    if unknown:
        raise ScenarioError(f"[{where}]: unknown key(s) {', '.join(unknown)}")
    kwargs = dict(table)
    if cls is EmitterConfig and "lines" in kwargs:
        lines = kwargs["lines"]
        if not isinstance(lines, list):
            raise ScenarioError("[emitter].lines must be an array of tables")
        kwargs["lines"] = tuple(_build(SpectralLine, ln, "emitter.lines") for ln in lines)
    if cls is EmitterConfig and "background_band" in kwargs:
        kwargs["background_band"] = tuple(kwargs["background_band"])
    try:
        if base is not None:
            if cls is EmitterConfig and "emission_prob" not in kwargs and (
                "collected_rate_target" in kwargs or "rep_rate" in kwargs
            ):
                kwargs["emission_prob"] = None
            return dataclasses.replace(base, **kwargs)
        return cls(**kwargs)
    except ScenarioError:
        raise
    except (TypeError, ContractError) as exc:
        raise ScenarioError(f"[{where}]: {exc}") from None


def scenario_from_dict(doc: dict) -> Scenario:
    doc = dict(doc)
    top = doc.pop("scenario", None)
    if not isinstance(top, dict) or "kind" not in top:
        raise ScenarioError("missing [scenario] section with a 'kind' key")
    kwargs = dict(top)
    plain = {f.name for f in dataclasses.fields(Scenario)} - set(_SECTIONS)
    unknown = sorted(set(kwargs) - plain)
    if unknown:
        raise ScenarioError(f"[scenario]: unknown key(s) {', '.join(unknown)}")
    for section in list(doc):
        if section not in _SECTIONS:
            raise ScenarioError(f"unknown section [{section}]")
    for section, table in doc.items():
        if not isinstance(table, dict):
            raise ScenarioError(f"[{section}] must be a table")
        if section in ("etalon", "fbg") and table.get("enabled", True) is False:
            if set(table) != {"enabled"}:
                raise ScenarioError(f"[{section}]: a disabled filter takes no other keys")
            kwargs[section] = None
            continue
        table = {k: v for k, v in table.items() if k != "enabled"}
        if section in ("detector_a", "detector_b"):
            preset = table.pop("preset", None)
            base = {"apd": SI_APD, "sspd": SSPD, None: None}.get(preset, "bad")
            if base == "bad":
                raise ScenarioError(f"[{section}]: unknown preset {preset!r} (apd or sspd)")
            kwargs[section] = _build(DetectorSpec, table, section, base) if base else _build(DetectorSpec, table, section)
        else:
            kwargs[section] = _build(_SECTIONS[section], table, section, _SECTIONS[section]())
    for key in ("delays", "powers"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    try:
        return Scenario(**kwargs)
    except TypeError as exc:
        raise ScenarioError(f"[scenario]: {exc}") from None


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        doc = tomllib.loads(path.read_text())
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{path}: {exc}") from None
    scn = scenario_from_dict(doc)
    if not scn.name:
        scn = scn.replace(name=path.stem)
    return scn


def block_seed(seed: int, block: int) -> int:
    """Seed of acquisition block ``block``; blocks are statistically independent."""
    import numpy as np

    return int(np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=(0xB10C, block)).generate_state(1, np.uint64)[0])

