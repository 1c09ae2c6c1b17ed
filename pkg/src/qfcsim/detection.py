"""Detectors and passive HBT optics: photon streams in, time tags out."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numba
import numpy as np

from .streams import PS_PER_S, ContractError, PhotonStream, is_sorted, require_sorted, substream


@dataclass(frozen=True)
class DetectorSpec:
    efficiency: float
    dark_rate: float  # s^-1
    jitter_sigma: float  # ps, Gaussian standard deviation
    dead_time: float = 0.0  # ps
    label: str = ""

    def __post_init__(self):
        if not 0 <= self.efficiency <= 1:
            raise ContractError("efficiency must lie in [0, 1]")
        if self.dark_rate < 0 or self.jitter_sigma < 0 or self.dead_time < 0:
            raise ContractError("dark_rate, jitter_sigma and dead_time must be non-negative")


SI_APD = DetectorSpec(efficiency=0.65, dark_rate=300.0, jitter_sigma=250.0, label="Si-APD")
SSPD = DetectorSpec(efficiency=0.122, dark_rate=10.0, jitter_sigma=25.0, label="SSPD")


class TimeTag(NamedTuple):
    channel: int
    timestamp: int


def beamsplitter(stream: PhotonStream, ratio: float, seed: int, name: str = "beamsplitter"):
    """Route each photon to output A with probability ``ratio``, else to B."""
    require_sorted(stream)
    if not 0 <= ratio <= 1:
        raise ContractError("beamsplitter ratio must lie in [0, 1]")
    to_a = substream(seed, name).random(len(stream)) < ratio
    return stream.select(to_a), stream.select(~to_a)


def delay_line(stream: PhotonStream, delay: int) -> PhotonStream:
    """Shift every timestamp by ``delay`` ps."""
    require_sorted(stream)
    return PhotonStream(stream.timestamps + np.int64(delay), stream.wavelengths, stream.origins, stream.duration)


@numba.njit(cache=True)
def _dead_time_mask(ts, dead):
    keep = np.zeros(ts.size, np.bool_)
    last = 0
    for i in range(ts.size):
        if i == 0 or ts[i] - last >= dead:
            keep[i] = True
            last = ts[i]
    return keep


def apply_dead_time(tags: np.ndarray, dead_time: float) -> np.ndarray:
    """Drop every tag closer than ``dead_time`` to the previous surviving tag."""
    if dead_time <= 0 or tags.size == 0:
        return tags
    return tags[_dead_time_mask(tags, float(dead_time))]


def detect(stream: PhotonStream, spec: DetectorSpec, duration: float, seed: int, name: str = "detector") -> np.ndarray:
    """Detector time tags (int64 ps, sorted) for a photon stream.

    Steps: efficiency thinning, Gaussian jitter (rounded half-to-even to
    integer ps, negative values kept), Poisson dark counts over
    ``[0, duration]``, re-sort, optional non-paralysable dead time.
    """
    require_sorted(stream)
    rng = substream(seed, name)
    kept = stream.timestamps[rng.random(len(stream)) < spec.efficiency]
    if spec.jitter_sigma > 0 and kept.size:
        kept = kept + np.rint(rng.normal(0.0, spec.jitter_sigma, kept.size)).astype(np.int64)
    dur_ps = int(round(duration * PS_PER_S))
    n_dark = rng.poisson(spec.dark_rate * duration) if spec.dark_rate > 0 else 0
    dark = np.rint(rng.random(n_dark) * dur_ps).astype(np.int64)
    tags = np.sort(np.concatenate([kept, dark]), kind="stable")
    return apply_dead_time(tags, spec.dead_time)


def _has_partner(x: np.ndarray, y: np.ndarray, eps: int) -> np.ndarray:
    """True where some element of sorted ``y`` lies within ``eps`` of ``x``."""
    if y.size == 0:
        return np.zeros(x.size, bool)
    i = np.searchsorted(y, x - eps, side="left")
    ok = i < y.size
    hit = np.zeros(x.size, bool)
    hit[ok] = y[i[ok]] <= x[ok] + eps
    return hit


def discard_crosstalk_bursts(tags_a: np.ndarray, tags_b: np.ndarray, coincidence_epsilon: int):
    """Remove tags that have a partner on the other channel within +-epsilon.

    Electronic cross-talk bursts show up simultaneously on both channels of
    the counting card, while genuine photon pairs are separated by at least
    the jitter-limited antibunching notch, so an epsilon of a few tens of ps
    only strips the artefacts.
    """
    tags_a = np.asarray(tags_a, np.int64)
    tags_b = np.asarray(tags_b, np.int64)
    if not (is_sorted(tags_a) and is_sorted(tags_b)):
        raise ContractError("tag lists must be sorted")
    eps = int(coincidence_epsilon)
    return tags_a[~_has_partner(tags_a, tags_b, eps)], tags_b[~_has_partner(tags_b, tags_a, eps)]
