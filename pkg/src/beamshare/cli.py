"""
Command-line front end.

    beamshare run <config.yaml> [--seed N] [--scheme S] [--slots T] [--out-dir D]
    beamshare sweep <config.yaml> --param run.scheme --values "[omni, zf4]"
    beamshare report <summary.csv> [...] [--out-dir D]

Exit codes: 0 success, 2 usage or configuration error, 3 simulation error,
4 unreadable or malformed results file, 5 other I/O failure.
"""

import argparse
import logging
from pathlib import Path
import sys

from .config import SCHEME_CHOICES, dump_config, parse_config, with_overrides
from .errors import BeamshareError, ConfigError, SimulationError
from .experiments import (MalformedResults, parse_values, report, run_sweep,
                          summary_rows, write_summary)
from .sim import run_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SIMULATION = 3
EXIT_RESULTS = 4
EXIT_IO = 5

log = logging.getLogger("beamshare")


def _load(args):
    cfg = parse_config(args.config)
    fields = {}
    if args.seed is not None:
        fields["seeds"] = [args.seed]
    if args.scheme is not None:
        fields["scheme"] = args.scheme
    if args.slots is not None:
        fields["slots"] = args.slots
    return with_overrides(cfg, **fields) if fields else cfg


def _out_dir(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args):
    cfg = _load(args)
    out = _out_dir(args)
    (out / "config.yaml").write_text(dump_config(cfg))
    if not args.no_slot_csv:
        for seed in cfg.run.seeds:
            with open(out / f"slots_seed{seed}.csv", "w", newline="") as fh:
                run_scenario(cfg, seed=seed, slot_csv=fh)
    rows = summary_rows(cfg, args.workers)
    write_summary(rows, out / "summary.csv")
    _, text = report(out / "summary.csv")
    print(text)
    print(f"wrote {out / 'summary.csv'}")
    return EXIT_OK


def cmd_sweep(args):
    cfg = _load(args)
    out = _out_dir(args)
    rows = run_sweep(cfg, args.param, parse_values(args.values), args.workers)
    (out / "config.yaml").write_text(dump_config(cfg))
    write_summary(rows, out / "sweep.csv")
    _, text = report(out / "sweep.csv")
    print(text)
    print(f"wrote {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_report(args):
    _, text = report(args.csv, out_dir=args.out_dir)
    print(text)
    if args.out_dir is not None:
        print(f"wrote {Path(args.out_dir) / 'report.dat'}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(
        prog="beamshare",
        description="Slot-level simulator of beamforming-based spectrum sharing.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="YAML scenario file")
        sp.add_argument("--seed", type=int, help="run this single seed")
        sp.add_argument("--scheme", choices=SCHEME_CHOICES,
                        help="override run.scheme")
        sp.add_argument("--slots", type=int, help="override run.slots")
        sp.add_argument("--out-dir", default="results",
                        help="output directory (default: %(default)s)")
        sp.add_argument("--workers", type=int, default=1,
                        help="concurrent runs (default: %(default)s)")

    r = sub.add_parser("run", help="run every seed of a scenario")
    common(r)
    r.add_argument("--no-slot-csv", action="store_true",
                   help="skip the per-slot CSV files")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="sweep one config parameter")
    common(s)
    s.add_argument("--param", required=True,
                   help="dotted config path, e.g. geometry.secondary_rx")
    s.add_argument("--values", required=True, nargs="+",
                   help="YAML list of values, or 'grid' for every free "
                        "receiver position of the preset")
    s.set_defaults(func=cmd_sweep)

    rp = sub.add_parser("report", help="summarize one or more result CSVs")
    rp.add_argument("csv", nargs="+")
    rp.add_argument("--out-dir", default=None,
                    help="also write report.dat plot data here")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if getattr(args, "workers", 1) < 1:
        print("error: --workers must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    except MalformedResults as exc:
        print(f"results error: {exc}", file=sys.stderr)
        return EXIT_RESULTS
    except BeamshareError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
