"""Run reports: headline metrics plus the CSV tables they were computed from."""
from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from pathlib import Path

OUTPUT_ENV = "QFCSIM_OUTPUT_DIR"


def output_root() -> Path:
    """Root directory for run outputs (``$QFCSIM_OUTPUT_DIR``, default ``./qfcsim-out``)."""
    return Path(os.environ.get(OUTPUT_ENV) or "qfcsim-out")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_table(header, rows) -> str:
    """CSV text with floats printed at full (repr) precision."""
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def parse_table(text: str) -> dict[str, list[float]]:
    """Columns of a ``csv_table`` text, as floats keyed by header name."""
    lines = [ln for ln in text.splitlines() if ln]
    header = lines[0].split(",")
    cols = {h: [] for h in header}
    for ln in lines[1:]:
        for h, v in zip(header, ln.split(",")):
            cols[h].append(float(v) if v not in ("true", "false") else float(v == "true"))
    return cols


@dataclass
class RunReport:
    kind: str
    name: str
    scenario: dict
    metrics: dict = field(default_factory=dict)
    tables: dict[str, str] = field(default_factory=dict)  # file name -> CSV text
    artifacts: dict[str, Path] = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.metrics[key]

    def text(self) -> str:
        out = [f"# qfcsim run report: {self.name or self.kind}", "", "[metrics]"]
        out += [f"{k} = {_fmt(v)}" for k, v in self.metrics.items()]
        out += ["", "[artifacts]"]
        out += [f"{k} = {self.artifacts.get(k, k)}" for k in self.tables]
        out += ["", "[stats]"]
        out += [f"{k} = {_fmt(v)}" for k, v in self.stats.items()]
        out += ["", "[scenario]"]
        out += _flatten(self.scenario)
        return "\n".join(out) + "\n"

    def write(self, out_dir) -> Path:
        """Write every CSV table and ``report.txt`` into ``out_dir``."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for fname, text in self.tables.items():
            path = out_dir / fname
            path.write_text(text)
            self.artifacts[fname] = path
        report = out_dir / "report.txt"
        report.write_text(self.text())
        return report


def _flatten(d: dict, prefix: str = "") -> list[str]:
    lines = []
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            lines += _flatten(v, key + ".")
        else:
            lines.append(f"{key} = {_fmt(v)}")
    return lines

