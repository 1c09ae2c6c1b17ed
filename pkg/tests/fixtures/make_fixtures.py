"""Regenerate the committed fixtures.

The golden histogram is built with an explicit all-pairs loop and the g2
normalisation written out by hand, independently of the sweep correlator.
Run from the repository root:  python3 tests/fixtures/make_fixtures.py
"""
from pathlib import Path

import numpy as np

HERE = Path(__file__).parent
BIN = 512
# "--window 200ns" is rounded up to a whole number of bins: 391 * 512 ps
WINDOW = 391 * BIN


def write_qtag(path, channel, ts):
    rec = np.empty(ts.size, [("channel", "<u1"), ("timestamp", "<i8")])
    rec["channel"] = channel
    rec["timestamp"] = ts
    path.write_bytes(b"QTAG0001" + rec.tobytes())


def tags():
    rng = np.random.default_rng(1312)
    span = 200_000_000  # 200 us
    a = np.sort(rng.integers(0, span, 1000))
    partners = a[rng.random(a.size) < 0.3]
    partners = partners + 5_000 + np.rint(rng.normal(0, 300, partners.size)).astype(np.int64)
    b = np.sort(np.concatenate([rng.integers(0, span, 1000 - partners.size), partners]))
    return a.astype(np.int64), b.astype(np.int64)


def golden_histogram(a, b, w, window):
    n = window // w
    counts = [0] * (2 * n + 1)
    for ta in a.tolist():
        for tb in b.tolist():
            d = tb - ta
            # bin k holds k*w - w/2 <= d < k*w + w/2
            k = (2 * d + w) // (2 * w)
            if -n <= k <= n:
                counts[k + n] += 1
    start, stop = int(max(a[0], b[0])), int(min(a[-1], b[-1]))
    t_int = (stop - start) / 1e12
    r1 = int(np.count_nonzero((a >= start) & (a <= stop))) / t_int
    r2 = int(np.count_nonzero((b >= start) & (b <= stop))) / t_int
    norm = r1 * r2 * (w / 1e12) * t_int
    lines = ["tau_ps,counts,g2"]
    for k in range(-n, n + 1):
        c = counts[k + n]
        lines.append(f"{k * w},{c},{c / norm!r}")
    return "\n".join(lines) + "\n"


def sinc_points():
    # conversion acceptance: sinc^2 with 54.6 GHz FWHM, sampled every 5 GHz
    half_max_u = 1.3915573782515103  # sin(u)/u = 1/sqrt(2)
    x = np.arange(-150.0, 150.0 + 1e-9, 5.0)
    u = 2 * half_max_u * x / 54.6
    y = np.sinc(u / np.pi) ** 2
    lines = ["detuning_ghz,transmission"] + [f"{xi!r},{yi!r}" for xi, yi in zip(x.tolist(), y.tolist())]
    return "\n".join(lines) + "\n"


if __name__ == "__main__":
    a, b = tags()
    write_qtag(HERE / "a.qtag", 0, a)
    write_qtag(HERE / "b.qtag", 1, b)
    (HERE / "golden_hist_512ps_200ns.csv").write_text(golden_histogram(a, b, BIN, WINDOW))
    (HERE / "sinc_points.csv").write_text(sinc_points())
