"""Command-line interface.

Subcommands write CSV curves plus a JSON manifest next to each output file
(``<out>.manifest.json``) that is enough to rerun the command.  Exit codes:
0 success, 1 failed validation, 2 usage error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from . import acceptance
from . import metrics as mt
from . import sinr_dist as sd
from .mimo_model import SystemConfig
from .montecarlo import SimConfig, empirical_outage, empirical_ser_paired, empirical_sinr, histogram
from .special_fn import SeriesControl, SeriesTruncationError

SEED_ENV = "WLSINR_SEED"
EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

PDF_MODES = ("analytic", "approx", "empirical", "numeric")
METHODS = ("closed", "mgf", "empirical")


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# argument types

def _pos_int(s):
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be positive: {s!r}")
    return v


def _nonneg_int(s):
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}")
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be nonnegative: {s!r}")
    return v


def _pos_float(s):
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {s!r}")
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be a positive finite number: {s!r}")
    return v


def _nonneg_float(s):
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {s!r}")
    if not (v >= 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be a nonnegative finite number: {s!r}")
    return v


def _grid(s):
    """count,min,max"""
    parts = s.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("grid must be count,min,max")
    try:
        n, lo, hi = int(parts[0]), float(parts[1]), float(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {s!r}")
    if n < 2 or not 0 < lo < hi:
        raise argparse.ArgumentTypeError("grid needs count >= 2 and 0 < min < max")
    return (n, lo, hi)


def _db_range(s):
    """start:step:stop, stop inclusive"""
    parts = s.split(":")
    try:
        if len(parts) == 1:
            return [float(parts[0])]
        if len(parts) != 3:
            raise ValueError
        a, st, b = (float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError("range must be start:step:stop")
    if st <= 0 or b < a:
        raise argparse.ArgumentTypeError("range needs step > 0 and stop >= start")
    n = int(math.floor((b - a) / st + 1e-9)) + 1
    return [round(a + i * st, 10) for i in range(n)]


def _choices(allowed):
    def parse(s):
        items = [x.strip() for x in s.split(",") if x.strip()]
        bad = [x for x in items if x not in allowed]
        if not items or bad:
            raise argparse.ArgumentTypeError(f"choose from {', '.join(allowed)}")
        return list(dict.fromkeys(items))
    return parse


def default_seed():
    v = os.environ.get(SEED_ENV)
    if v is None:
        return 0
    try:
        return int(v)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {v!r}")


# --------------------------------------------------------------------------
# output

def _fmt(v):
    if isinstance(v, str):
        return v
    v = float(v)
    return repr(v) if math.isfinite(v) else ("nan" if v != v else ("inf" if v > 0 else "-inf"))


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _write(out, text):
    if out in (None, "-"):
        sys.stdout.write(text)
        return None
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return out


def manifest(args, outputs, extra=None):
    params = {k: v for k, v in vars(args).items() if k not in ("func", "out")}
    m = dict(command=args.command, parameters=params, seed=getattr(args, "seed", None),
             version=__version__, timestamp=_dt.datetime.now(_dt.timezone.utc).isoformat(),
             outputs=outputs)
    if hasattr(args, "snr_db"):
        m["snr"] = dict(db=args.snr_db, linear=10.0 ** (args.snr_db / 10.0))
    if getattr(args, "snr_db_range", None) is not None:
        m["snr"] = dict(db=args.snr_db_range, linear=[10.0 ** (d / 10.0) for d in args.snr_db_range])
    if extra:
        m.update(extra)
    return m


def _emit(args, header, rows, extra=None):
    path = _write(args.out, _csv_text(header, rows))
    if path:
        with open(path + ".manifest.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(manifest(args, [path], extra), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _system(args):
    if not 1 <= args.nt <= args.nr:
        raise UsageError(f"need 1 <= nt <= nr, got nt={args.nt}, nr={args.nr}")
    return SystemConfig.from_snr_db(args.nt, args.nr, args.snr_db if hasattr(args, "snr_db") else 0.0)


# --------------------------------------------------------------------------
# commands

def default_grid(config, n=400):
    """n log-spaced points up to the 99.99th percentile of the approximate law."""
    hi = sd.approx_quantile(0.9999, config)
    return np.geomspace(hi * 1e-4, hi, n)


def cmd_pdf(args):
    cfg = _system(args)
    modes = args.mode
    if "analytic" in modes and cfg.n_t not in (2, 3):
        raise UsageError("analytic mode needs nt in {2, 3}")
    if "numeric" in modes and cfg.n_t not in (2, 3):
        raise UsageError("numeric mode needs nt in {2, 3}")
    if "empirical" in modes and args.samples < 1:
        raise UsageError("empirical mode needs --samples >= 1")
    grid = np.geomspace(args.grid[1], args.grid[2], args.grid[0]) if args.grid else default_grid(cfg)
    ctl = SeriesControl(rel_tol=args.tol, max_terms=args.max_terms) if args.tol else None
    curves = {}
    for mode in modes:
        if mode == "analytic":
            f = sd.analytic_pdf_nt2 if cfg.n_t == 2 else sd.analytic_pdf_nt3
            curves[mode] = f(grid, cfg.n_r, cfg.rho, ctl)
        elif mode == "approx":
            curves[mode] = (sd.approx_pdf_clamped if args.clamp else sd.approx_pdf)(grid, cfg)
        elif mode == "numeric":
            curves[mode] = np.array([sd.general_pdf_numeric(t, cfg) for t in grid])
        else:
            s = empirical_sinr(SimConfig(cfg, args.seed, args.samples, workers=args.workers))
            h = histogram(s)
            idx = np.searchsorted(h.bin_edges, grid, side="right") - 1
            inside = (idx >= 0) & (idx < h.counts.size)
            curves[mode] = np.where(inside, h.normalized_density[np.clip(idx, 0, h.counts.size - 1)], 0.0)
    if len(modes) == 1:
        rows = zip(grid, curves[modes[0]])
        header = ["tau", "density"]
    else:
        rows = [(t, v, m) for m in modes for t, v in zip(grid, curves[m])]
        header = ["tau", "density", "kind"]
    _emit(args, header, rows)
    return EXIT_OK


def cmd_outage(args):
    if "mgf" in args.methods:
        raise UsageError("outage supports the closed and empirical methods")
    rows = []
    for db in args.snr_db_range:
        cfg = SystemConfig.from_snr_db(args.nt, args.nr, db)
        row = [db]
        if "closed" in args.methods:
            row.append(mt.outage_probability(args.threshold, cfg))
        if "empirical" in args.methods:
            s = empirical_sinr(SimConfig(cfg, args.seed, args.samples, workers=args.workers))
            est = empirical_outage(s, args.threshold)
            row += [est.value, est.stderr]
        rows.append(row)
    header = ["snr_db"] + (["closed"] if "closed" in args.methods else []) \
        + (["empirical", "empirical_stderr"] if "empirical" in args.methods else [])
    _emit(args, header, rows)
    return EXIT_OK


def _ser_columns(args, grid):
    """Columns of SER values keyed by name."""
    cols = {}
    rhos = 10.0 ** (np.asarray(grid) / 10.0)
    cfg = SystemConfig(args.nt, args.nr)
    if "closed" in args.methods:
        cols["closed"] = mt.ser_closed_form(rhos, args.nt, args.nr)
    if "mgf" in args.methods:
        rng = np.random.default_rng(np.random.SeedSequence(args.seed, spawn_key=(7,)))
        v, e = mt.ser_via_mgf(rhos, cfg, args.spectra, rng, full_output=True)
        cols["mgf"], cols["mgf_stderr"] = v, e
    if "empirical" in args.methods:
        r = empirical_ser_paired(SimConfig(cfg, args.seed, args.samples, args.symbols, args.workers), grid)
        cols["empirical"] = r["wlmmse"].ser
        cols["empirical_stderr"] = r["wlmmse"].stderr
        cols["lmmse_empirical"] = r["lmmse"].ser
        cols["lmmse_empirical_stderr"] = r["lmmse"].stderr
    return cols


def cmd_ser(args):
    grid = args.snr_db_range
    cols = _ser_columns(args, grid)
    _emit(args, ["snr_db"] + list(cols), [[g] + [cols[k][i] for k in cols] for i, g in enumerate(grid)])
    return EXIT_OK


def cmd_diversity(args):
    grid = args.snr_db_range
    cols = _ser_columns(args, grid)
    names = [k for k in cols if not k.endswith("stderr")]
    rows = [[g] + [cols[k][i] for k in names] for i, g in enumerate(grid)]
    window = (min(grid), max(grid))
    slope = []
    for k in names:
        curve = mt.SerCurve(grid, np.clip(cols[k], 0, 1), "empirical")
        try:
            slope.append(mt.diversity_slope_fit(curve, window))
        except ValueError:
            slope.append(math.nan)
    # summary rows follow the curve; their first field names the quantity
    rows.append(["fitted_slope"] + slope)
    rows.append(["analytic"] + [mt.diversity_gain_wl(args.nt, args.nr)] * len(names))
    rows.append(["lmmse"] + [mt.diversity_gain_lmmse(args.nt, args.nr)] * len(names))
    rows.append(["delta"] + [mt.diversity_delta(args.nt)] * len(names))
    _emit(args, ["snr_db"] + names, rows)
    return EXIT_OK


def validation_report(profile, seed, only=None, log=None):
    """Report dict: deterministic ``body`` plus ``manifest`` and ``timing``."""
    t0 = time.perf_counter()
    results, timing = acceptance.run(profile, seed, only=only, log=log)
    body = dict(profile=profile, seed=seed, criteria=results,
                all_passed=all(r["passed"] for r in results))
    timing["total"] = time.perf_counter() - t0
    man = dict(command="validate", parameters=dict(profile=profile, seed=seed, only=only),
               version=__version__, timestamp=_dt.datetime.now(_dt.timezone.utc).isoformat())
    return dict(manifest=man, timing=timing, body=body)


def cmd_validate(args):
    log = (lambda r, s: print(acceptance.summary_line(r, s), file=sys.stderr, flush=True)) \
        if not args.silent else None
    rep = validation_report(args.profile, args.seed, args.only, log)
    text = json.dumps(rep, indent=2, sort_keys=True) + "\n"
    _write(args.out, text)
    return EXIT_OK if rep["body"]["all_passed"] else EXIT_FAIL


def cmd_replay(args):
    with open(args.manifest, encoding="utf-8") as fh:
        man = json.load(fh)
    params = dict(man["parameters"])
    argv = [man["command"]]
    for k, v in params.items():
        if k in ("command",) or v is None or v is False:
            continue
        flag = "--" + k.replace("_", "-")
        if v is True:
            argv.append(flag)
        elif k == "snr_db_range":
            argv += [flag, ",".join(repr(float(x)) for x in v)]
        elif k == "grid":
            argv += [flag, ",".join(repr(x) for x in v)]
        elif isinstance(v, list):
            argv += [flag, ",".join(str(x) for x in v)]
        else:
            argv += [flag, str(v)]
    out = args.out or man["outputs"][0]
    argv += ["--out", out]
    code = main(argv)
    if code == EXIT_OK and args.check and out != man["outputs"][0]:
        with open(out, "rb") as a, open(man["outputs"][0], "rb") as b:
            if a.read() != b.read():
                print("replay output differs from the original", file=sys.stderr)
                return EXIT_FAIL
    return code


# --------------------------------------------------------------------------

def _db_list(s):
    # replay passes explicit comma lists
    if "," in s:
        try:
            return [float(x) for x in s.split(",")]
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad SNR list {s!r}")
    return _db_range(s)


def build_parser():
    p = argparse.ArgumentParser(prog="wlsinr", description="SINR statistics of widely linear MMSE MIMO receivers.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(q, snr_range=False):
        q.add_argument("--nt", type=_pos_int, required=True, help="transmit antennas")
        q.add_argument("--nr", type=_pos_int, required=True, help="receive antennas")
        if snr_range:
            q.add_argument("--snr-db-range", type=_db_list, required=True, help="start:step:stop in dB")
        else:
            q.add_argument("--snr-db", type=float, required=True)
        q.add_argument("--seed", type=int, default=None, help=f"default from ${SEED_ENV}, else 0")
        q.add_argument("--workers", type=_pos_int, default=1)
        q.add_argument("--out", default=None, help="output file, stdout when omitted")

    q = sub.add_parser("pdf", help="SINR density on a grid")
    common(q)
    q.add_argument("--mode", type=_choices(PDF_MODES), default=["analytic"],
                   help="comma list of " + ",".join(PDF_MODES))
    q.add_argument("--grid", type=_grid, default=None, help="count,min,max (log-spaced)")
    q.add_argument("--samples", type=_nonneg_int, default=100_000)
    q.add_argument("--tol", type=_pos_float, default=None, help="series relative tolerance")
    q.add_argument("--max-terms", type=_pos_int, default=10_000)
    q.add_argument("--clamp", action="store_true", help="clamp and renormalize the approximate density")
    q.set_defaults(func=cmd_pdf)

    q = sub.add_parser("outage", help="outage probability against SNR")
    common(q, True)
    q.add_argument("--threshold", type=_nonneg_float, required=True)
    q.add_argument("--methods", type=_choices(METHODS), default=["closed"])
    q.add_argument("--samples", type=_pos_int, default=100_000)
    q.set_defaults(func=cmd_outage)

    for name, func, helptext in (("ser", cmd_ser, "BPSK symbol error rate against SNR"),
                                 ("diversity", cmd_diversity, "SER slopes and diversity orders")):
        q = sub.add_parser(name, help=helptext)
        common(q, True)
        q.add_argument("--methods", type=_choices(METHODS), default=["closed"])
        q.add_argument("--samples", type=_pos_int, default=100_000, help="channel realizations")
        q.add_argument("--symbols", type=_pos_int, default=10, help="symbols per realization and stream")
        q.add_argument("--spectra", type=_pos_int, default=20_000, help="spectra for the mgf method")
        q.set_defaults(func=func)

    q = sub.add_parser("validate", help="run the acceptance suite")
    q.add_argument("--profile", choices=sorted(acceptance.PROFILES), default="quick")
    q.add_argument("--seed", type=int, default=None)
    q.add_argument("--only", type=lambda s: [int(x) for x in s.split(",")], default=None,
                   help="comma list of criterion numbers")
    q.add_argument("--out", default=None)
    q.add_argument("--silent", action="store_true")
    q.set_defaults(func=cmd_validate)

    q = sub.add_parser("replay", help="rerun a command from its manifest")
    q.add_argument("manifest")
    q.add_argument("--out", default=None, help="write here instead of the original path")
    q.add_argument("--check", action="store_true", help="fail unless the output matches the original")
    q.set_defaults(func=cmd_replay)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK
    try:
        if getattr(args, "seed", 0) is None:
            args.seed = default_seed()
        if getattr(args, "only", None) and any(not 1 <= i <= 12 for i in args.only):
            raise UsageError("criteria are numbered 1 to 12")
        return args.func(args)
    except UsageError as e:
        print(f"wlsinr {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, SeriesTruncationError, sd.IntegrationError, FloatingPointError) as e:
        print(f"wlsinr {args.command}: numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as e:
        print(f"wlsinr {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
