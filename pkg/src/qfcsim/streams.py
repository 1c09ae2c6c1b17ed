"""Photon streams: the timestamped-event currency passed between stages.

A stream is stored column-wise (timestamps, wavelengths, origin labels) so
that every stage can operate on whole numpy arrays.  Timestamps are integer
picoseconds.
"""
from __future__ import annotations

import enum
import zlib
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

PS_PER_S = 10**12


class Origin(enum.IntEnum):
    SIGNAL = 0
    BACKGROUND = 1
    CONVERTER_NOISE = 2
    DARK = 3


NOISE_ORIGINS = (Origin.BACKGROUND, Origin.CONVERTER_NOISE, Origin.DARK)


class ContractError(ValueError):
    """An input violated a documented precondition (e.g. unsorted stream)."""


class CapacityError(RuntimeError):
    """A generation request would exceed the configured event cap."""


# Hard cap on events materialised by a single generator call.
MAX_EVENTS = 200_000_000


class PhotonEvent(NamedTuple):
    timestamp: int
    wavelength: float
    origin: Origin


def substream(seed: int, name: str, index: int = 0) -> np.random.Generator:
    """Independent generator keyed by ``(seed, name, index)``.

    Adding a new named stream never perturbs the draws of existing ones.
    """
    key = (zlib.crc32(name.encode("utf-8")), int(index))
    return np.random.default_rng(np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=key))


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class PhotonStream:
    timestamps: np.ndarray  # int64, ps, sorted
    wavelengths: np.ndarray  # float64, nm
    origins: np.ndarray  # uint8, Origin values
    duration: int  # acquisition span [0, duration] in ps

    def __post_init__(self):
        ts = np.ascontiguousarray(self.timestamps, dtype=np.int64)
        wl = np.ascontiguousarray(self.wavelengths, dtype=np.float64)
        og = np.ascontiguousarray(self.origins, dtype=np.uint8)
        if not (ts.shape == wl.shape == og.shape) or ts.ndim != 1:
            raise ContractError("stream columns must be 1-d arrays of equal length")
        object.__setattr__(self, "timestamps", _frozen(ts))
        object.__setattr__(self, "wavelengths", _frozen(wl))
        object.__setattr__(self, "origins", _frozen(og))
        object.__setattr__(self, "duration", int(self.duration))

    @classmethod
    def empty(cls, duration: int = 0) -> "PhotonStream":
        return cls(np.empty(0, np.int64), np.empty(0), np.empty(0, np.uint8), duration)

    @classmethod
    def from_events(cls, events, duration: int) -> "PhotonStream":
        events = list(events)
        if not events:
            return cls.empty(duration)
        ts, wl, og = zip(*events)
        return cls(np.array(ts, np.int64), np.array(wl, float), np.array(og, np.uint8), duration)

    def __len__(self) -> int:
        return self.timestamps.size

    def __iter__(self) -> Iterator[PhotonEvent]:
        for t, w, o in zip(self.timestamps.tolist(), self.wavelengths.tolist(), self.origins.tolist()):
            yield PhotonEvent(t, w, Origin(o))

    def __getitem__(self, i: int) -> PhotonEvent:
        return PhotonEvent(int(self.timestamps[i]), float(self.wavelengths[i]), Origin(int(self.origins[i])))

    def select(self, mask: np.ndarray) -> "PhotonStream":
        return PhotonStream(self.timestamps[mask], self.wavelengths[mask], self.origins[mask], self.duration)

    def count(self, *origins: Origin) -> int:
        return int(np.isin(self.origins, np.array(origins, np.uint8)).sum())

    def is_sorted(self) -> bool:
        return is_sorted(self.timestamps)

    def equals(self, other: "PhotonStream") -> bool:
        return (
            self.duration == other.duration
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.wavelengths, other.wavelengths)
            and np.array_equal(self.origins, other.origins)
        )


def is_sorted(a: np.ndarray) -> bool:
    return a.size < 2 or bool(np.all(a[1:] >= a[:-1]))


def require_sorted(stream: PhotonStream, what: str = "stream") -> None:
    if not stream.is_sorted():
        raise ContractError(f"{what} is not time-ordered")


def merge_streams(*streams: PhotonStream) -> PhotonStream:
    """Time-ordered union of sorted streams.

    Ties are broken by (input index, position within input), so the merge is
    stable and deterministic.
    """
    if not streams:
        return PhotonStream.empty()
    for i, s in enumerate(streams):
        require_sorted(s, f"input stream {i}")
    duration = max(s.duration for s in streams)
    nonempty = [s for s in streams if len(s)]
    if len(nonempty) == 0:
        return PhotonStream.empty(duration)
    if len(nonempty) == 1:
        s = nonempty[0]
        return PhotonStream(s.timestamps, s.wavelengths, s.origins, duration)
    ts = np.concatenate([s.timestamps for s in nonempty])
    # concatenation order already encodes (input index, event index);
    # a stable sort keeps it for equal timestamps
    order = np.argsort(ts, kind="stable")
    return PhotonStream(
        ts[order],
        np.concatenate([s.wavelengths for s in nonempty])[order],
        np.concatenate([s.origins for s in nonempty])[order],
        duration,
    )


def stream_snr(stream: PhotonStream) -> float:
    """Signal-to-noise ratio of a stream from its origin labels.

    Returns ``inf`` when the stream carries no noise events.
    """
    if len(stream) == 0:
        raise ContractError("SNR of an empty stream is undefined")
    signal = stream.count(Origin.SIGNAL)
    noise = len(stream) - signal
    if noise == 0:
        return float("inf")
    return signal / noise
