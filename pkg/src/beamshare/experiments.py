"""
Seed sweeps, parameter sweeps and the summary / report CSV formats.

Summary CSV (schema version 1), one row per run plus one ``aggregate`` row
per swept value::

    row_type, param, value, seed, scheme, slots,
    throughput_primary, throughput_secondary, aggregate_throughput,
    jain_index, jain_index_load_normalized, mean_leakage_dbm,
    <each metric>_std   (aggregate rows only)

Values are formatted with a fixed number of decimals so that reruns are
byte-identical.
"""

from concurrent.futures import ProcessPoolExecutor
import csv
import io
import json
import math
from pathlib import Path
import statistics

import yaml

from .config import (config_from_dict, config_to_dict, receiver_locations,
                     set_path)
from .errors import ConfigError
from .sim import run_scenario

METRICS = ("throughput_primary", "throughput_secondary", "aggregate_throughput",
           "jain_index", "jain_index_load_normalized", "mean_leakage_dbm")
SUMMARY_COLUMNS = (("row_type", "param", "value", "seed", "scheme", "slots")
                   + METRICS + tuple(f"{m}_std" for m in METRICS))


class MalformedResults(ValueError):
    pass


def metrics_row(m):
    return {
        "seed": m.seed, "scheme": m.scheme, "slots": m.slots,
        "throughput_primary": m.primary_throughput,
        "throughput_secondary": m.secondary_throughput,
        "aggregate_throughput": m.aggregate_throughput,
        "jain_index": m.jain_index,
        "jain_index_load_normalized": m.jain_index_load_normalized,
        "mean_leakage_dbm": m.mean_leakage_dbm,
    }


def _run_one(args):
    cfg_dict, seed = args
    cfg = config_from_dict(cfg_dict)
    return metrics_row(run_scenario(cfg, seed=seed))


def run_seeds(cfg, workers=1):
    """Run every seed of ``cfg``; returns one metrics row per seed."""
    jobs = [(config_to_dict(cfg), s) for s in cfg.run.seeds]
    return _map(jobs, workers)


def _map(jobs, workers):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_one, jobs))
    return [_run_one(j) for j in jobs]


def _finite(values):
    out = []
    for v in values:
        if v is None:
            continue
        if isinstance(v, float) and not math.isfinite(v):
            continue
        out.append(v)
    return out


def aggregate_rows(rows):
    """Mean and sample standard deviation of each metric over ``rows``."""
    agg = {"seed": "", "scheme": rows[0]["scheme"] if rows else "",
           "slots": rows[0]["slots"] if rows else 0}
    for m in METRICS:
        vals = _finite(r[m] for r in rows)
        agg[m] = statistics.fmean(vals) if vals else None
        agg[f"{m}_std"] = statistics.stdev(vals) if len(vals) > 1 else 0.0
    return agg


def expand_values(cfg, param, values):
    """Resolve sweep values; ``"grid"`` expands to every free receiver
    position of the config's preset."""
    if values == "grid" or values == ["grid"]:
        if param != "geometry.secondary_rx":
            raise ConfigError(param, "'grid' only applies to geometry.secondary_rx")
        if cfg.preset is None:
            raise ConfigError("preset", "'grid' needs a config with a preset")
        values = receiver_locations(cfg.preset)
    if not isinstance(values, list) or not values:
        raise ConfigError(param, "need a non-empty list of sweep values")
    out = []
    for v in values:
        if (param == "geometry.secondary_rx" and isinstance(v, list)
                and len(v) == 2 and all(isinstance(x, (int, float)) for x in v)):
            v = [v]
        out.append(v)
    return out


def _value_label(v):
    if isinstance(v, str):
        return v
    return json.dumps(v, separators=(",", ":"))


def run_sweep(cfg, param, values, workers=1):
    """
    One run per (value, seed) of ``cfg`` with ``param`` overridden.

    Returns the list of summary rows: every run row followed, per value, by
    an aggregate row holding mean and standard deviation over seeds.
    """
    values = expand_values(cfg, param, values)
    variants = [set_path(cfg, param, v) for v in values]
    jobs = [(config_to_dict(c), s) for c in variants for s in c.run.seeds]
    results = _map(jobs, workers)
    rows, i = [], 0
    for v, c in zip(values, variants):
        label = _value_label(v)
        per_value = []
        for _ in c.run.seeds:
            r = dict(results[i], row_type="run", param=param, value=label)
            per_value.append(r)
            i += 1
        rows.extend(per_value)
    for v, c in zip(values, variants):
        label = _value_label(v)
        mine = [r for r in rows if r["row_type"] == "run" and r["value"] == label]
        rows.append(dict(aggregate_rows(mine), row_type="aggregate",
                         param=param, value=label))
    return rows


def summary_rows(cfg, workers=1):
    """Rows of a plain multi-seed run (no swept parameter)."""
    runs = [dict(r, row_type="run", param="", value="")
            for r in run_seeds(cfg, workers)]
    return runs + [dict(aggregate_rows(runs), row_type="aggregate",
                        param="", value="")]


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isinf(v):
            return "-inf" if v < 0 else "inf"
        return f"{v:.6f}"
    return str(v)


def write_summary(rows, path_or_stream):
    """Write summary rows as CSV to a path or an open text stream."""
    if isinstance(path_or_stream, (str, Path)):
        with open(path_or_stream, "w", newline="") as fh:
            return write_summary(rows, fh)
    w = csv.writer(path_or_stream, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in SUMMARY_COLUMNS])


def read_summary(path):
    """Parse a summary CSV; raises ``MalformedResults`` on schema errors."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise MalformedResults(f"cannot read {path}: {exc}") from None
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise MalformedResults(f"{path}: empty file")
    missing = [c for c in ("row_type", "scheme", "aggregate_throughput",
                           "throughput_primary", "throughput_secondary",
                           "jain_index", "mean_leakage_dbm")
               if c not in reader.fieldnames]
    if missing:
        raise MalformedResults(f"{path}: missing columns {missing}")
    rows = []
    for n, raw in enumerate(reader, start=2):
        if None in raw or any(v is None for v in raw.values()):
            raise MalformedResults(f"{path}:{n}: wrong number of fields")
        row = dict(raw)
        for m in METRICS:
            if m not in row:
                continue
            cell = row[m]
            try:
                row[m] = float(cell) if cell != "" else None
            except ValueError:
                raise MalformedResults(f"{path}:{n}: {m}={cell!r} "
                                       "is not a number") from None
        rows.append(row)
    return rows


def report(paths, out_dir=None):
    """
    Per-scheme (or per swept value) comparison table from summary CSVs.

    Returns ``(table_rows, text)``. Each table row holds the mean metrics
    over the group's runs and the aggregate-throughput gain in percent over
    the baseline group (the omnidirectional scheme when present, else the
    first group). With ``out_dir`` a whitespace-separated ``report.dat``
    plot-data file is written there too.
    """
    if isinstance(paths, (str, Path)):
        paths = [paths]
    runs = []
    for p in paths:
        runs.extend(r for r in read_summary(p) if r["row_type"] == "run")
    if not runs:
        raise MalformedResults("no run rows in the input")
    groups = {}
    for r in runs:
        label = r.get("value") or r["scheme"]
        groups.setdefault(label, []).append(r)
    table = []
    for label, rs in groups.items():
        agg = aggregate_rows(rs)
        table.append({"label": label, "runs": len(rs), **{m: agg[m] for m in METRICS},
                      "aggregate_throughput_std": agg["aggregate_throughput_std"]})
    base = next((t for t in table if t["label"] == "omni"), table[0])
    for t in table:
        b = base["aggregate_throughput"]
        t["gain_pct"] = (100.0 * (t["aggregate_throughput"] - b) / b) if b else None

    head = ("scheme", "runs", "primary", "secondary", "aggregate", "jain",
            "leak_dBm", "gain")
    lines = ["{:<14}{:>5}{:>11}{:>11}{:>11}{:>8}{:>10}{:>9}".format(*head)]
    for t in table:
        lines.append("{:<14}{:>5}{:>11.1f}{:>11.1f}{:>11.1f}{:>8}{:>10}{:>9}".format(
            t["label"][:14], t["runs"], t["throughput_primary"] or 0.0,
            t["throughput_secondary"] or 0.0, t["aggregate_throughput"] or 0.0,
            "-" if t["jain_index"] is None else f"{t['jain_index']:.3f}",
            "-" if t["mean_leakage_dbm"] is None else f"{t['mean_leakage_dbm']:.1f}",
            "-" if t["gain_pct"] is None else f"{t['gain_pct']:+.0f}%"))
    text = "\n".join(lines)

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "report.dat", "w") as fh:
            fh.write("# index label throughput_primary throughput_secondary "
                     "aggregate_throughput aggregate_throughput_std jain_index "
                     "mean_leakage_dbm gain_pct\n")
            for i, t in enumerate(table):
                fh.write(" ".join([str(i), t["label"].replace(" ", "")] + [
                    _cell(t[k]) if t[k] is not None else "nan"
                    for k in ("throughput_primary", "throughput_secondary",
                              "aggregate_throughput", "aggregate_throughput_std",
                              "jain_index", "mean_leakage_dbm", "gain_pct")]) + "\n")
    return table, text


def parse_values(texts):
    """Parse ``--values`` arguments: each one is a YAML flow list (or the
    word ``grid``); multiple arguments are concatenated."""
    out = []
    for t in texts:
        if t.strip() == "grid":
            return "grid"
        try:
            v = yaml.safe_load(t)
        except yaml.YAMLError as exc:
            raise ConfigError("--values", f"not valid YAML: {exc}") from None
        out.extend(v if isinstance(v, list) else [v])
    return out
