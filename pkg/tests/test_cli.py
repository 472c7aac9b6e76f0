import csv
from pathlib import Path

import pytest

from beamshare.cli import (EXIT_CONFIG, EXIT_OK, EXIT_RESULTS, EXIT_SIMULATION,
                           main)
from beamshare.config import config_from_dict
from beamshare.experiments import (SUMMARY_COLUMNS, read_summary, report,
                                   run_sweep, write_summary)


def _cfg_file(tmp_path, body="preset: scenario1\nrun: {slots: 400, seeds: [1, 2]}\n"):
    p = tmp_path / "scenario.yaml"
    p.write_text(body)
    return p


def test_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", str(_cfg_file(tmp_path)), "--scheme", "zf4",
                 "--out-dir", str(out)]) == EXIT_OK
    rows = list(csv.DictReader(open(out / "summary.csv")))
    assert [r["row_type"] for r in rows] == ["run", "run", "aggregate"]
    assert (out / "slots_seed1.csv").exists() and (out / "slots_seed2.csv").exists()
    assert "zf4" in capsys.readouterr().out


def test_run_seed_override(tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(_cfg_file(tmp_path)), "--seed", "7",
                 "--out-dir", str(out)]) == EXIT_OK
    assert sorted(p.name for p in out.glob("slots_*.csv")) == ["slots_seed7.csv"]


def test_sweep_and_report(tmp_path):
    out = tmp_path / "sw"
    assert main(["sweep", str(_cfg_file(tmp_path)), "--param", "run.scheme",
                 "--values", "[omni, zf4]", "--out-dir", str(out),
                 "--workers", "2"]) == EXIT_OK
    assert main(["report", str(out / "sweep.csv"), "--out-dir", str(out)]) == EXIT_OK
    dat = (out / "report.dat").read_text().splitlines()
    assert dat[0].startswith("#") and len(dat) == 3


@pytest.mark.parametrize("argv,code", [
    (["run", "/nonexistent/cfg.yaml"], EXIT_CONFIG),
    (["report", "/nonexistent/summary.csv"], EXIT_RESULTS),
])
def test_error_exit_codes(argv, code, capsys):
    assert main(argv) == code
    assert capsys.readouterr().err.strip()


def test_bad_config_exit_code(tmp_path, capsys):
    p = _cfg_file(tmp_path, "radio: {secondary_power: -1}\n")
    assert main(["run", str(p), "--out-dir", str(tmp_path)]) == EXIT_CONFIG
    assert "radio.secondary_power" in capsys.readouterr().err


def test_bad_sweep_param_exit_code(tmp_path):
    assert main(["sweep", str(_cfg_file(tmp_path)), "--param", "run.nope",
                 "--values", "[1]", "--out-dir", str(tmp_path)]) == EXIT_CONFIG


def test_simulation_error_exit_code(tmp_path, capsys):
    p = _cfg_file(tmp_path, "geometry: {secondary_rx: [[0.0, 3.0]]}\n"
                            "run: {slots: 10, scheme: omni}\n")
    assert main(["run", str(p), "--out-dir", str(tmp_path)]) == EXIT_SIMULATION
    assert "setup" in capsys.readouterr().err


def test_malformed_report_exit_code(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("row_type,scheme\nrun,omni\n")
    assert main(["report", str(bad)]) == EXIT_RESULTS
    bad.write_text(",".join(SUMMARY_COLUMNS) + "\nrun,,,1,omni,10,x\n")
    assert main(["report", str(bad)]) == EXIT_RESULTS


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["run"])
    assert exc.value.code != 0


def _summary(tmp_path, name, scheme, agg):
    rows = [{"row_type": "run", "param": "", "value": "", "seed": 1,
             "scheme": scheme, "slots": 10, "throughput_primary": agg / 2,
             "throughput_secondary": agg / 2, "aggregate_throughput": agg,
             "jain_index": 1.0, "jain_index_load_normalized": 1.0,
             "mean_leakage_dbm": -70.0}]
    p = tmp_path / name
    write_summary(rows, p)
    return p


def test_report_gain_column(tmp_path):
    table, text = report([_summary(tmp_path, "a.csv", "omni", 100.0),
                          _summary(tmp_path, "b.csv", "zf4", 222.0)])
    assert [t["label"] for t in table] == ["omni", "zf4"]
    assert table[1]["gain_pct"] == pytest.approx(122.0)
    assert "+122%" in text


def test_report_single_run(tmp_path):
    table, _ = report(_summary(tmp_path, "a.csv", "mrt", 50.0))
    assert len(table) == 1 and table[0]["gain_pct"] == 0.0


def test_sweep_cardinality_over_receiver_grid():
    cfg = config_from_dict({"preset": "scenario1",
                            "run": {"slots": 50, "seeds": list(range(1, 11))}})
    rows = run_sweep(cfg, "geometry.secondary_rx", "grid", workers=4)
    assert sum(r["row_type"] == "run" for r in rows) == 100
    assert sum(r["row_type"] == "aggregate" for r in rows) == 10


def test_sweep_scheme_layout(tmp_path):
    cfg = config_from_dict({"preset": "scenario1",
                            "run": {"slots": 300, "seeds": [1, 2, 3]}})
    rows = run_sweep(cfg, "run.scheme", ["omni", "zf4"])
    write_summary(rows, tmp_path / "s.csv")
    back = read_summary(tmp_path / "s.csv")
    agg = [r for r in back if r["row_type"] == "aggregate"]
    assert [r["value"] for r in agg] == ["omni", "zf4"]
    assert all(r["aggregate_throughput_std"] != "" for r in agg)


def test_sweep_parallel_equals_serial():
    cfg = config_from_dict({"preset": "scenario1", "run": {"slots": 200, "seeds": [1, 2]}})
    assert (run_sweep(cfg, "mac.offered_load", [0.1, 1.0], workers=1)
            == run_sweep(cfg, "mac.offered_load", [0.1, 1.0], workers=3))
