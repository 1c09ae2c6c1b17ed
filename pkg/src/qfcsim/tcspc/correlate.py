"""Coincidence correlation of time-tag lists and g2 normalisation.

Bin convention: bin ``k`` collects delays ``tau = b - a`` with
``k*w - w/2 <= tau < k*w + w/2``, so tau = 0 sits at the centre of bin 0.
A histogram with ``window = n*w`` holds bins ``-n..n``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numba
import numpy as np

from ..streams import PS_PER_S, ContractError, is_sorted


@dataclass(frozen=True)
class CorrelationConfig:
    bin_width: int = 512  # ps
    window: int = 200_704  # ps, centre of the outermost bin

    def __post_init__(self):
        if int(self.bin_width) != self.bin_width or self.bin_width <= 0:
            raise ContractError("bin_width must be a positive integer number of ps")
        if self.window < 0 or self.window % self.bin_width:
            raise ContractError("window must be a non-negative integer multiple of bin_width")
        object.__setattr__(self, "bin_width", int(self.bin_width))
        object.__setattr__(self, "window", int(self.window))

    @property
    def n_side(self) -> int:
        return self.window // self.bin_width

    @property
    def reach(self) -> int:
        """Largest |tau| (exclusive on the positive side) that lands in a bin."""
        return self.window + self.bin_width // 2

    @classmethod
    def around(cls, bin_width: int, window: int) -> "CorrelationConfig":
        """Config whose window is ``window`` rounded up to a multiple of ``bin_width``."""
        return cls(bin_width, -(-int(window) // bin_width) * bin_width)


@dataclass(frozen=True, eq=False)
class CorrelationHistogram:
    bin_centers: np.ndarray  # ps
    counts: np.ndarray
    rate1: float  # s^-1
    rate2: float  # s^-1
    t_bin: int  # ps
    t_int: float  # s

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "CorrelationHistogram") -> "CorrelationHistogram":
        if self.t_bin != other.t_bin or not np.array_equal(self.bin_centers, other.bin_centers):
            raise ContractError("histograms have different binning")
        t = self.t_int + other.t_int
        return CorrelationHistogram(
            self.bin_centers,
            self.counts + other.counts,
            (self.rate1 * self.t_int + other.rate1 * other.t_int) / t,
            (self.rate2 * self.t_int + other.rate2 * other.t_int) / t,
            self.t_bin,
            t,
        )


class G2Curve(NamedTuple):
    tau: np.ndarray  # ps
    g2: np.ndarray
    t_bin: int


@numba.njit(nogil=True, cache=True)
def _sweep(a, b, w, n):
    counts = np.zeros(2 * n + 1, np.int64)
    lo_edge = -(2 * n + 1) * w  # compare 2*tau against the covered span
    lo = 0
    nb = b.size
    for i in range(a.size):
        t = a[i]
        while lo < nb and 2 * (b[lo] - t) < lo_edge:
            lo += 1
        j = lo
        while j < nb:
            k = (2 * (b[j] - t) + w) // (2 * w)
            if k > n:
                break
            counts[k + n] += 1
            j += 1
    return counts


def _check_tags(tags, what):
    tags = np.ascontiguousarray(tags, dtype=np.int64)
    if not is_sorted(tags):
        raise ContractError(f"{what} tags are not sorted")
    return tags


def _span(tags, span):
    if span is not None:
        return int(span[0]), int(span[1])
    if tags.size == 0:
        raise ContractError("cannot infer the acquisition span of an empty tag list")
    return int(tags[0]), int(tags[-1])


def correlation_counts(tags_a, tags_b, cfg: CorrelationConfig) -> np.ndarray:
    """Raw coincidence counts; cost is O(|A| + |B| + pairs in window)."""
    return _sweep(_check_tags(tags_a, "A"), _check_tags(tags_b, "B"), cfg.bin_width, cfg.n_side)


def _chunk_counts(a, b, cfg, chunk_size, workers):
    reach = cfg.reach
    bounds = list(range(0, a.size, chunk_size)) + [a.size]
    jobs = []
    for s, e in zip(bounds[:-1], bounds[1:]):
        lo = np.searchsorted(b, a[s] - reach, side="left")
        hi = np.searchsorted(b, a[e - 1] + reach, side="right")
        jobs.append((a[s:e], b[lo:hi]))

    def run(job):
        return _sweep(job[0], job[1], cfg.bin_width, cfg.n_side)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]
    return np.sum(parts, axis=0) if parts else np.zeros(2 * cfg.n_side + 1, np.int64)


def cross_correlate(
    tags_a,
    tags_b,
    cfg: CorrelationConfig,
    span_a: tuple[int, int] | None = None,
    span_b: tuple[int, int] | None = None,
    *,
    chunk_size: int | None = None,
    workers: int = 1,
) -> CorrelationHistogram:
    """Histogram of delays ``b - a`` for all pairs within the window.

    ``span_a``/``span_b`` are the acquisition intervals in ps (default: first
    to last tag).  ``t_int`` is their overlap and the rates count the tags
    inside it.  With ``chunk_size`` the A list is split into chunks that each
    see the B tags within one window of their edges; the summed result is
    identical to the monolithic sweep.
    """
    a = _check_tags(tags_a, "A")
    b = _check_tags(tags_b, "B")
    sa, sb = _span(a, span_a), _span(b, span_b)
    start, stop = max(sa[0], sb[0]), min(sa[1], sb[1])
    if stop <= start:
        raise ContractError("acquisition spans do not overlap")
    t_int = (stop - start) / PS_PER_S
    n1 = np.count_nonzero((a >= start) & (a <= stop))
    n2 = np.count_nonzero((b >= start) & (b <= stop))
    if chunk_size:
        counts = _chunk_counts(a, b, cfg, int(chunk_size), workers)
    else:
        counts = _sweep(a, b, cfg.bin_width, cfg.n_side)
    centers = np.arange(-cfg.n_side, cfg.n_side + 1, dtype=np.int64) * cfg.bin_width
    return CorrelationHistogram(centers, counts, n1 / t_int, n2 / t_int, cfg.bin_width, t_int)


def brute_force_counts(tags_a, tags_b, cfg: CorrelationConfig) -> np.ndarray:
    """All-pairs reference correlator (quadratic; for small fixtures only)."""
    a = np.asarray(tags_a, np.int64)
    b = np.asarray(tags_b, np.int64)
    d = (b[None, :] - a[:, None]).ravel()
    k = (2 * d + cfg.bin_width) // (2 * cfg.bin_width)
    k = k[np.abs(k) <= cfg.n_side]
    return np.bincount(k + cfg.n_side, minlength=2 * cfg.n_side + 1).astype(np.int64)


class NormalizationError(ContractError):
    pass


def normalize_g2(hist: CorrelationHistogram) -> G2Curve:
    """g2 = G2 / (N1 N2 t_bin t_int), the coherent-light reference."""
    if hist.rate1 <= 0 or hist.rate2 <= 0 or hist.t_int <= 0:
        raise NormalizationError("normalisation needs positive rates and integration time")
    norm = hist.rate1 * hist.rate2 * (hist.t_bin / PS_PER_S) * hist.t_int
    return G2Curve(hist.bin_centers, hist.counts / norm, hist.t_bin)


def g2_zero(curve: G2Curve, offset: int = 0) -> float:
    """Normalised value of the bin containing delay ``offset`` (ps)."""
    k = (2 * int(offset) + curve.t_bin) // (2 * curve.t_bin)
    idx = np.searchsorted(curve.tau, k * curve.t_bin)
    if idx >= curve.tau.size or curve.tau[idx] != k * curve.t_bin:
        raise ContractError(f"delay {offset} ps lies outside the correlation window")
    return float(curve.g2[idx])


def find_dip(curve: G2Curve) -> tuple[int, float]:
    """Dip position: argmin of the 3-bin running mean, ties to the smallest |tau|.

    Returns the delay and the unsmoothed g2 value of that bin.
    """
    g = curve.g2
    sm = np.convolve(g, np.ones(3) / 3, mode="same")
    sm[0], sm[-1] = np.inf, np.inf  # edge bins have a truncated kernel
    lowest = np.flatnonzero(sm == sm.min())
    best = lowest[np.argmin(np.abs(curve.tau[lowest]))]
    return int(curve.tau[best]), float(g[best])


def rebin(hist: CorrelationHistogram, factor: int) -> CorrelationHistogram:
    """Merge ``factor`` (odd) adjacent bins, keeping tau = 0 at a bin centre."""
    if factor < 1 or factor % 2 == 0:
        raise ContractError("rebin factor must be a positive odd integer")
    n = (hist.counts.size - 1) // 2
    m = (n - factor // 2) // factor  # coarse bins fully covered on each side
    half = factor // 2
    centre = n
    out = np.array(
        [hist.counts[centre + k * factor - half: centre + k * factor + half + 1].sum() for k in range(-m, m + 1)],
        dtype=np.int64,
    )
    w = hist.t_bin * factor
    return CorrelationHistogram(np.arange(-m, m + 1, dtype=np.int64) * w, out, hist.rate1, hist.rate2, w, hist.t_int)


@dataclass(frozen=True, eq=False)
class DecayHistogram:
    edges: np.ndarray  # ps, len = counts + 1
    counts: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def coarsen(self, start: float, factor: int) -> "DecayHistogram":
        """Merge bins at and after ``start`` in groups of ``factor``; a ragged tail is dropped."""
        i0 = int(np.searchsorted(self.edges, start))
        n_tail = (self.counts.size - i0) // factor
        head_edges, head_counts = self.edges[: i0 + 1], self.counts[:i0]
        tail = self.counts[i0: i0 + n_tail * factor].reshape(n_tail, factor).sum(axis=1)
        tail_edges = self.edges[i0 + factor: i0 + n_tail * factor + 1: factor]
        return DecayHistogram(np.concatenate([head_edges, tail_edges]), np.concatenate([head_counts, tail]))


def start_stop_histogram(sync_tags, detector_tags, cfg: CorrelationConfig, period: int | None = None) -> DecayHistogram:
    """Start-stop histogram: first detector tag after each sync, minus the sync time.

    Bins are ``[k*w, (k+1)*w)`` over ``[0, range)`` where the range is
    ``period`` (default: median sync spacing, or ``cfg.window`` when given).
    A stop only counts if it arrives before the next sync.
    """
    s = _check_tags(sync_tags, "sync")
    d = _check_tags(detector_tags, "detector")
    if period is None:
        period = cfg.window if cfg.window else int(np.median(np.diff(s))) if s.size > 1 else None
    if not period:
        raise ContractError("cannot infer the start-stop range")
    n_bins = -(-int(period) // cfg.bin_width)
    edges = np.arange(n_bins + 1, dtype=np.int64) * cfg.bin_width
    if s.size == 0 or d.size == 0:
        return DecayHistogram(edges, np.zeros(n_bins, np.int64))
    i = np.searchsorted(d, s, side="left")
    ok = i < d.size
    dt = np.full(s.size, -1, np.int64)
    dt[ok] = d[i[ok]] - s[ok]
    next_sync = np.append(s[1:], np.iinfo(np.int64).max)
    valid = ok & (dt < period) & (s + dt < next_sync)
    counts = np.bincount(dt[valid] // cfg.bin_width, minlength=n_bins)[:n_bins].astype(np.int64)
    return DecayHistogram(edges, counts)
