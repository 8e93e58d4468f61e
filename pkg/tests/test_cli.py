import csv
import json

import numpy as np
import pytest

from charpolylab import cli
from charpolylab.cli import (ConfigError, RunConfig, build_config, emit, main,
                             run, summary_schema, validate_against_schema)
from charpolylab.ensemble import load_spectrum


def test_emit_csv_roundtrip(tmp_path):
    path = tmp_path / "out.csv"
    rows = [[1, 0.1 + 2e-17, -3.5], [2, 1.0 / 3.0, 7.0]]
    emit(rows, path, "csv", header=["a", "b", "c"])
    with open(path, newline="") as fh:
        back = list(csv.reader(fh))
    assert back[0] == ["a", "b", "c"]
    for row, orig in zip(back[1:], rows):
        assert float(row[1]) == orig[1]
        assert float(row[2]) == orig[2]


def test_emit_empty_records(tmp_path):
    path = tmp_path / "empty.csv"
    emit([], path, "csv", header=["x", "y"])
    assert path.read_text() == "x,y\n"


def test_emit_json(tmp_path):
    path = tmp_path / "out.json"
    emit({"a": 1, "b": [0.25, 0.5]}, path, "json")
    assert json.loads(path.read_text()) == {"a": 1, "b": [0.25, 0.5]}


def test_schema_validation():
    schema = summary_schema()
    good = {"N": 8, "n_samples": 2, "seed": 1,
            "ratio_quartiles": [0.1, 0.2, 0.3],
            "second_order_quartiles": [0.0, 0.1, 0.2]}
    assert validate_against_schema(good, schema["max_experiment"])
    bad = dict(good)
    del bad["seed"]
    with pytest.raises(ValueError):
        validate_against_schema(bad, schema["max_experiment"])
    bad2 = dict(good, N="eight")
    with pytest.raises(ValueError):
        validate_against_schema(bad2, schema["max_experiment"])


def test_config_file_and_overrides(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("N 32\nseed 5\nsamples 3\n")
    config = build_config("max-experiment", cli._parse_config_file(cfgfile),
                          {"seed": 9})
    assert config.N == 32
    assert config.seed == 9          # flag overrides file
    assert config.n_samples == 3


def test_unknown_config_key_rejected(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("frobnicate 3\n")
    assert main(["max-experiment", "--config", str(cfgfile)]) == 2


def test_unknown_command_rejected():
    with pytest.raises(SystemExit) as exc:
        main(["not-a-command"])
    assert exc.value.code == 2
    with pytest.raises(ConfigError):
        RunConfig(command="nope")


def test_unwritable_output_fails():
    code = main(["gen-spectrum", "--N", "8", "--seed", "1",
                 "--out", "/nonexistent-dir/x.csv"])
    assert code == 2


def test_gen_spectrum_roundtrip(tmp_path):
    out = tmp_path / "spec.csv"
    assert main(["gen-spectrum", "--N", "16", "--seed", "4",
                 "--out", str(out)]) == 0
    spec = load_spectrum(out)
    assert spec.N == 16 and spec.seed == 4


def test_byte_identical_reruns(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    args = ["max-experiment", "--N", "64", "--samples", "4", "--seed", "7",
            "--y", "2"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_thread_count_invariance(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    base = ["max-experiment", "--N", "64", "--samples", "6", "--seed", "3"]
    assert main(base + ["--threads", "1", "--out", str(a)]) == 0
    assert main(base + ["--threads", "2", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_check_exit_codes(monkeypatch):
    def fake_runner(cfg):
        return None, [("always_fails", False)]

    monkeypatch.setitem(cli._RUNNERS, "gen-spectrum", fake_runner)
    cfg = RunConfig(command="gen-spectrum", check=True)
    assert run(cfg) == 1
    cfg2 = RunConfig(command="gen-spectrum", check=False)
    assert run(cfg2) == 0


def test_check_passing_command(tmp_path):
    # n = 10 is the calibrated operating point of the lower-bound checks
    assert main(["lowerbound-sim", "--n", "10", "--samples", "150", "--seed", "2",
                 "--check", "--out", str(tmp_path / "lb.json")]) == 0
    doc = json.loads((tmp_path / "lb.json").read_text())
    validate_against_schema(doc, summary_schema()["lowerbound_sim"])


def test_threads_env_default(monkeypatch):
    monkeypatch.setenv("CHARPOLY_THREADS", "3")
    cfg = RunConfig(command="gen-spectrum")
    assert cfg.threads == 3
