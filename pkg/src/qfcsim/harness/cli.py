"""Command line: ``qfcsim run | correlate | fit | tags convert``.

Exit codes: 0 success, 1 runtime contract violation, 2 usage or malformed
configuration.
"""
from __future__ import annotations

import argparse
import re
import sys
from pathlib import Path

import numpy as np

from ..streams import CapacityError, ContractError
from ..tcspc import (
    CorrelationConfig,
    DecayHistogram,
    cross_correlate,
    fit_biexponential,
    fit_exponential,
    fit_sinc2,
    fringe_scan,
)
from ..tcspc.io import histogram_csv, read_curve_csv, read_tags, write_qtag, write_tags_csv
from .report import output_root
from .runs import run
from .scenario import ScenarioError, load_scenario

_UNITS = {"ps": 1, "ns": 10**3, "us": 10**6, "µs": 10**6, "ms": 10**9, "s": 10**12}


def parse_time_ps(text: str) -> int:
    """``'512ps'``, ``'200ns'``, ``'1.5us'`` or a bare number of ps, as integer ps."""
    m = re.fullmatch(r"\s*([0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?)\s*(ps|ns|us|µs|ms|s)?\s*", text)
    if not m:
        raise argparse.ArgumentTypeError(f"not a time: {text!r} (e.g. 512ps, 200ns)")
    value = float(m.group(1)) * _UNITS[m.group(2) or "ps"]
    if abs(value - round(value)) > 1e-6:
        raise argparse.ArgumentTypeError(f"{text!r} is not a whole number of picoseconds")
    return int(round(value))


class UsageError(Exception):
    pass


def _pick_channel(tags: dict, channel, path) -> np.ndarray:
    if channel is None:
        if len(tags) != 1:
            raise UsageError(f"{path} holds channels {sorted(tags)}; choose one with --channel-a/--channel-b")
        return next(iter(tags.values()))
    if channel not in tags:
        raise ContractError(f"{path} has no channel {channel}")
    return tags[channel]


def cmd_run(args) -> int:
    scn = load_scenario(args.scenario)
    if args.seed is not None:
        scn = scn.replace(seed=args.seed)
    out = Path(args.out) if args.out else output_root() / (scn.name or scn.kind)
    rep = run(scn, out)
    sys.stdout.write(rep.text())
    return 0


def cmd_correlate(args) -> int:
    if args.bin <= 0:
        raise UsageError("--bin must be positive")
    a = _pick_channel(read_tags(args.tags_a), args.channel_a, args.tags_a)
    b = _pick_channel(read_tags(args.tags_b), args.channel_b, args.tags_b)
    hist = cross_correlate(a, b, CorrelationConfig.around(args.bin, args.window))
    text = histogram_csv(hist)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_fit(args) -> int:
    header, data = read_curve_csv(args.curve)
    x, y = data[:, 0], data[:, 1]
    if args.model == "exp":
        res = fit_exponential(x, y, data[:, 2] if data.shape[1] > 2 else None)
        sys.stdout.write(res.report())
    elif args.model == "sinc2":
        res = fit_sinc2(x, y, data[:, 2] if data.shape[1] > 2 else None)
        sys.stdout.write(res.report())
    elif args.model == "biexp":
        if data.shape[1] >= 3:  # t_start, t_stop, counts
            hist = DecayHistogram(np.append(data[:, 0], data[-1, 1]), data[:, 2])
        else:  # uniformly spaced bin centres, counts
            w = float(np.median(np.diff(x)))
            hist = DecayHistogram(np.append(x - w / 2, x[-1] + w / 2), y)
        res = fit_biexponential(hist, args.t_min, args.t_max)
        sys.stdout.write(res.report())
    else:  # sine: phase (rad), rate
        fit = fringe_scan(y, x)
        for k in ("offset", "amplitude", "phase", "i_max", "i_min", "visibility"):
            sys.stdout.write(f"{k} = {getattr(fit, k)!r}\n")
        sys.stdout.write(f"zero_amplitude = {str(fit.zero_amplitude).lower()}\n")
    return 0


def cmd_tags_convert(args) -> int:
    tags = read_tags(args.src)
    fmt = args.to or ("csv" if str(args.dst).lower().endswith(".csv") else "qtag")
    (write_tags_csv if fmt == "csv" else write_qtag)(args.dst, tags)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qfcsim", description="Quantum frequency conversion photon-counting simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario file and write its report and CSV tables")
    r.add_argument("scenario")
    r.add_argument("--out", help="output directory (default: $QFCSIM_OUTPUT_DIR/<scenario name>)")
    r.add_argument("--seed", type=int, help="override the scenario seed")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("correlate", help="coincidence histogram of two tag files")
    c.add_argument("tags_a")
    c.add_argument("tags_b")
    c.add_argument("--bin", type=parse_time_ps, default=512, help="bin width (default 512ps)")
    c.add_argument("--window", type=parse_time_ps, default=200_704, help="half window, rounded up to whole bins (default 200704ps)")
    c.add_argument("--channel-a", type=int)
    c.add_argument("--channel-b", type=int)
    c.add_argument("--out", help="write the histogram CSV here instead of stdout")
    c.set_defaults(func=cmd_correlate)

    f = sub.add_parser("fit", help="fit a model to a curve CSV")
    f.add_argument("curve")
    f.add_argument("--model", required=True, choices=("exp", "biexp", "sine", "sinc2"))
    f.add_argument("--t-min", type=float, help="biexp: first bin start (ps)")
    f.add_argument("--t-max", type=float, help="biexp: last bin stop (ps)")
    f.set_defaults(func=cmd_fit)

    t = sub.add_parser("tags", help="tag-file utilities")
    tsub = t.add_subparsers(dest="tags_command", required=True)
    tc = tsub.add_parser("convert", help="convert between qtag and CSV tag files")
    tc.add_argument("src")
    tc.add_argument("dst")
    tc.add_argument("--to", choices=("qtag", "csv"), help="output format (default: from the extension)")
    tc.set_defaults(func=cmd_tags_convert)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the usage line
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ScenarioError, UsageError) as exc:
        print(f"qfcsim: error: {exc}", file=sys.stderr)
        return 2
    except (ContractError, CapacityError, OSError) as exc:
        print(f"qfcsim: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
