import csv
import json
from dataclasses import replace

import numpy as np
import pytest

from incoherent_infidelity import cli
from incoherent_infidelity.config import (
    REFERENCE_SPAM,
    ExperimentConfig,
    dump_config,
    load_config,
    parse_config,
)
from incoherent_infidelity.exceptions import ConfigError, NumericalError

SMALL_CNOT = """\
schema_version: 1
experiment: cnot_average
seed: 11
phi: [0.0, 0.02]
xi_T: 0.001
theta: 0.05
M: 3
orders: [1, 2]
irb:
  lengths: [1, 4, 8, 12, 16]
  samples_per_length: 3
"""


def write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


# -- config ----------------------------------------------------------------------

def test_defaults_by_experiment():
    cfg = parse_config("schema_version: 1\nexperiment: cnot_average\nseed: 1\n")
    assert cfg.noise_weights == (1.0, 0.1) and cfg.spam == REFERENCE_SPAM and cfg.M == 300
    g = parse_config("schema_version: 1\nexperiment: ghz_infidelity\nseed: 1\n")
    assert g.noise_weights == (0.5, 0.5) and g.spam is None


@pytest.mark.parametrize("text, line, fragment", [
    ("schema_version: 1\nexperiment: irb\nseed: 3\nxi_tee: 0.1\n", 4, "unknown key"),
    ("schema_version: 1\nexperiment: irb\nseed: 3\nxi_T: -0.1\n", 4, "must be >= 0"),
    ("schema_version: 1\nexperiment: irb\nseed: 3\nirb:\n  lengths: [5, 3]\n", 5, "strictly increasing"),
    ("schema_version: 1\nexperiment: irb\nseed: 3\nirb:\n  samples: 3\n", 5, "unknown key"),
    ("schema_version: 1\nexperiment: nonsense\nseed: 3\n", 2, "must be one of"),
    ("schema_version: 2\nexperiment: irb\nseed: 3\n", 1, "unsupported version"),
    ("schema_version: 1\nexperiment: irb\nseed: 3\nshots: many\n", 4, "integer"),
    ("schema_version: 1\nexperiment: irb\nseed: 3\nM: [1\n", 5, "invalid YAML"),
])
def test_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == line
    assert str(info.value).startswith(f"line {line}: ")
    assert fragment in str(info.value)


def test_seed_is_mandatory_and_overridable():
    text = "schema_version: 1\nexperiment: bounds\n"
    with pytest.raises(ConfigError, match="seed is required"):
        parse_config(text)
    assert parse_config(text, seed_override=9).seed == 9
    assert parse_config(text + "seed: 4\n", seed_override=9).seed == 9
    with pytest.raises(ConfigError):
        parse_config(text + "seed: -4\n")


def test_spam_options():
    base = "schema_version: 1\nexperiment: cnot_average\nseed: 1\n"
    assert parse_config(base + "spam: none\n").spam is None
    custom = parse_config(base + "spam:\n  fiducial_angles: [0.01, 0.0]\n  povm: [0.5, 0, 0, 0.49]\n").spam
    assert custom.fiducial_angles == (0.01, 0.0) and custom.povm == (0.5, 0.0, 0.0, 0.49)


@pytest.mark.parametrize("as_json", [False, True])
def test_round_trip(as_json):
    cfg = parse_config(SMALL_CNOT)
    again = parse_config(dump_config(cfg, as_json), is_json=as_json)
    assert again == cfg
    assert parse_config(dump_config(again, as_json), is_json=as_json) == again


def test_json_files(tmp_path):
    p = write(tmp_path, json.dumps({"schema_version": 1, "experiment": "bounds", "seed": 2}), "c.json")
    assert load_config(p).experiment == "bounds"
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "{not json", "bad.json"))
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")


# -- CLI -------------------------------------------------------------------------

def read_csv(path):
    with open(path) as f:
        return list(csv.DictReader(f))


def test_cnot_average_outputs(tmp_path):
    cfg = write(tmp_path, SMALL_CNOT)
    out = tmp_path / "out"
    assert cli.main(["cnot-average", "--config", str(cfg), "--out", str(out)]) == 0
    rows = read_csv(out / "cnot_average.csv")
    assert [float(r["phi"]) for r in rows] == [0.0, 0.02]
    for key in ("estimate_n1", "estimate_n2", "single_shot_std_n2", "oracle_eps_inc", "oracle_eps_total",
                "irb_r", "irb_r_err"):
        assert all(r[key] != "" for r in rows)
    assert len(read_csv(out / "cnot_per_preparation.csv")) == 6
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 11 and "wall_time_s" not in manifest
    assert set(manifest["outputs"]) == {"cnot_average.csv", "cnot_per_preparation.csv",
                                        "irb_curves.csv", "irb_fits.csv"}


def test_zero_error_sweep_is_zero(tmp_path):
    text = "schema_version: 1\nexperiment: cnot_average\nseed: 5\nphi: [0.0]\nM: 2\nspam: none\nirb:\n  enabled: false\n"
    out = tmp_path / "out"
    assert cli.main(["cnot-average", "--config", str(write(tmp_path, text)), "--out", str(out)]) == 0
    (row,) = read_csv(out / "cnot_average.csv")
    for key in ("estimate_n1", "estimate_n2", "oracle_eps_inc", "oracle_eps_total"):
        assert abs(float(row[key])) < 1e-12
    assert row["irb_r"] == ""


def test_determinism_and_threads(tmp_path):
    cfg = write(tmp_path, SMALL_CNOT + "shots: 500\n")
    runs = []
    for name, threads in (("a", "1"), ("b", "1"), ("c", "2")):
        out = tmp_path / name
        assert cli.main(["cnot-average", "--config", str(cfg), "--out", str(out), "--threads", threads]) == 0
        runs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert runs[0] == runs[1] == runs[2]
    assert cli.main(["cnot-average", "--config", str(cfg), "--out", str(tmp_path / "d"), "--seed", "12"]) == 0
    assert (tmp_path / "d" / "cnot_average.csv").read_bytes() != runs[0]["cnot_average.csv"]


def test_bounds_subcommand(tmp_path, capsys):
    text = "schema_version: 1\nexperiment: bounds\nseed: 1\nbounds_circuit: cnot\neta_T: 0.0312\nxi_T: 0.0035\n"
    out = tmp_path / "out"
    assert cli.main(["bounds", "--config", str(write(tmp_path, text)), "--out", str(out)]) == 0
    (row,) = read_csv(out / "bounds.csv")
    assert row["linear_holds"] == "True" and row["cycle_holds"] == "True"
    assert "cycle_bound" in capsys.readouterr().out


def test_irb_subcommand(tmp_path):
    text = ("schema_version: 1\nexperiment: irb\nseed: 2\nphi: 0.04\nxi_T: 0.001\ntheta: 0.05\n"
            "record_wall_time: true\nirb:\n  lengths: [3, 18, 33, 48, 63, 78]\n  samples_per_length: 10\n")
    out = tmp_path / "out"
    assert cli.main(["irb", "--config", str(write(tmp_path, text)), "--out", str(out)]) == 0
    fits = read_csv(out / "irb_fits.csv")
    assert [f["curve"] for f in fits] == ["reference", "interleaved"]
    assert all(0 <= float(f["rms"]) < 0.1 and 0 < float(f["alpha"]) < 1 for f in fits)
    assert "wall_time_s" in json.loads((out / "manifest.json").read_text())


def test_exit_codes(tmp_path, monkeypatch, capsys):
    good = write(tmp_path, "schema_version: 1\nexperiment: bounds\nseed: 1\nbounds_circuit: cnot\n")
    assert cli.main(["bounds", "--config", str(write(tmp_path, "schema_version: 1\nexperiment: bounds\n",
                                                      "noseed.yaml"))]) == 2
    assert cli.main(["ghz", "--config", str(good)]) == 2
    assert cli.main(["bounds", "--config", str(good), "--shots", "zero"]) == 2
    assert cli.main(["bounds", "--config", str(good), "--threads", "0"]) == 2
    assert "config error" in capsys.readouterr().err

    def broken(cfg):
        raise NumericalError("survival probability outside [0, 1]")

    monkeypatch.setitem(cli.RUNNERS, "bounds", broken)
    assert cli.main(["bounds", "--config", str(good), "--out", str(tmp_path / "x")]) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_module_entry_point():
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "incoherent_infidelity", "--help"], capture_output=True,
                         text=True)
    assert res.returncode == 0
    for name in ("ghz", "cnot-average", "irb", "bounds"):
        assert name in res.stdout


@pytest.mark.slow
def test_ghz_zero_errors(tmp_path):
    text = "schema_version: 1\nexperiment: ghz_infidelity\nseed: 1\nn_max: 2\n"
    out = tmp_path / "out"
    assert cli.main(["ghz", "--config", str(write(tmp_path, text)), "--out", str(out)]) == 0
    for row in read_csv(out / "ghz_estimates.csv"):
        assert abs(float(row["estimate"])) < 1e-12
