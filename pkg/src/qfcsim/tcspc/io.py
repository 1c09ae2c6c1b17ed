"""Tag files (qtag v1 binary and CSV) and curve/histogram CSV outputs."""
from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from ..streams import ContractError, is_sorted
from .correlate import CorrelationHistogram, normalize_g2

QTAG_MAGIC = b"QTAG0001"
QTAG_RECORD = np.dtype([("channel", "<u1"), ("timestamp", "<i8")])


class TagFormatError(ContractError):
    pass


def _check_channels(tags: dict[int, np.ndarray]) -> dict[int, np.ndarray]:
    out = {}
    for ch, ts in tags.items():
        ch = int(ch)
        if not 0 <= ch <= 255:
            raise TagFormatError(f"channel {ch} does not fit in one byte")
        ts = np.asarray(ts, np.int64)
        if not is_sorted(ts):
            raise TagFormatError(f"channel {ch} tags are not sorted")
        out[ch] = ts
    return out


def write_qtag(path, tags: dict[int, np.ndarray]) -> None:
    """Write channel -> sorted timestamps as qtag v1 records, globally time-ordered."""
    tags = _check_channels(tags)
    chans = [np.full(ts.size, ch, np.uint8) for ch, ts in tags.items()]
    ts = np.concatenate(list(tags.values())) if tags else np.empty(0, np.int64)
    ch = np.concatenate(chans) if chans else np.empty(0, np.uint8)
    order = np.argsort(ts, kind="stable")
    rec = np.empty(ts.size, QTAG_RECORD)
    rec["channel"], rec["timestamp"] = ch[order], ts[order]
    with open(path, "wb") as fh:
        fh.write(QTAG_MAGIC)
        fh.write(rec.tobytes())


def read_qtag(path) -> dict[int, np.ndarray]:
    raw = Path(path).read_bytes()
    if raw[:8] != QTAG_MAGIC:
        raise TagFormatError(f"{path}: missing QTAG0001 magic")
    body = raw[8:]
    if len(body) % QTAG_RECORD.itemsize:
        raise TagFormatError(f"{path}: truncated record")
    rec = np.frombuffer(body, QTAG_RECORD)
    return _check_channels({int(c): rec["timestamp"][rec["channel"] == c] for c in np.unique(rec["channel"])})


def write_tags_csv(path, tags: dict[int, np.ndarray]) -> None:
    tags = _check_channels(tags)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["channel", "timestamp_ps"])
        for ch, ts in sorted(tags.items()):
            w.writerows((ch, int(t)) for t in ts)


def read_tags_csv(path) -> dict[int, np.ndarray]:
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if header != ["channel", "timestamp_ps"]:
            raise TagFormatError(f"{path}: expected header channel,timestamp_ps")
        data: dict[int, list[int]] = {}
        for n, row in enumerate(rows, start=2):
            try:
                ch, t = int(row[0]), int(row[1])
            except (ValueError, IndexError):
                raise TagFormatError(f"{path}:{n}: malformed row {row!r}") from None
            data.setdefault(ch, []).append(t)
    return _check_channels({ch: np.array(v, np.int64) for ch, v in data.items()})


def read_tags(path) -> dict[int, np.ndarray]:
    with open(path, "rb") as fh:
        head = fh.read(8)
    return read_qtag(path) if head == QTAG_MAGIC else read_tags_csv(path)


def histogram_csv(hist: CorrelationHistogram) -> str:
    """``tau_ps,counts,g2`` text; g2 is printed with repr precision."""
    g2 = normalize_g2(hist).g2
    buf = io.StringIO()
    buf.write("tau_ps,counts,g2\n")
    for t, c, g in zip(hist.bin_centers.tolist(), hist.counts.tolist(), g2.tolist()):
        buf.write(f"{t},{c},{g!r}\n")
    return buf.getvalue()


def write_histogram_csv(path, hist: CorrelationHistogram) -> None:
    Path(path).write_text(histogram_csv(hist))


def write_curve_csv(path, x, y, header=("x", "y")) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for a, b in zip(np.asarray(x).tolist(), np.asarray(y).tolist()):
            w.writerow([repr(a) if isinstance(a, float) else a, repr(b) if isinstance(b, float) else b])


def read_curve_csv(path) -> tuple[list[str], np.ndarray]:
    """Header and float columns of a curve CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ContractError(f"{path}: empty file")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], float)
    except ValueError as exc:
        raise ContractError(f"{path}: non-numeric value ({exc})") from None
    if data.ndim != 2 or data.shape[1] < 2:
        raise ContractError(f"{path}: need at least two columns")
    return rows[0], data
