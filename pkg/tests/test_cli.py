import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from readi_lab import cli, container
from readi_lab.beamform import decode_forces
from readi_lab.hadamard import sylvester
from readi_lab.simulate import ArrayGeometry, PulseDefinition

from conftest import C, F0
from oracles import multistatic_oracle

SCENARIOS = Path(__file__).parent.parent / "scenarios"
POINT = str(SCENARIOS / "point_16.json")
FAST = ["--set", "outputs.figures=false"]


def run(*args):
    return cli.main([str(a) for a in args])


def test_simulate_roundtrip_against_oracle(tmp_path):
    assert run("simulate", "--scenario", POINT, "--out", tmp_path, "--set", "beamform.precision=\"f64\"") == 0
    c = container.read_container(tmp_path / "encoded.readi", expect_dtype="f64")
    multi = decode_forces(c.to_dataset(), sylvester(16))
    cfg = json.loads((tmp_path / "resolved_config.json").read_text())
    geo = ArrayGeometry(16, C / F0)
    want = multistatic_oracle(np.array(cfg["scene"]["positions"]), [1.0, 1.0], geo, PulseDefinition(F0),
                              multi.n_samples)
    np.testing.assert_allclose(multi.samples, want, atol=1e-9)
    metrics = (tmp_path / "metrics.csv").read_text().splitlines()
    assert metrics[0] == "metric,scenario,value"
    assert "n_events,point_16,16" in metrics


def test_single_group_readi_equals_forces(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("beamform", "--scenario", POINT, "--out", a, *FAST) == 0
    assert run("readi", "--scenario", POINT, "--out", b, "--set", "grouping.S=1", "--set", "grouping.Q=16", *FAST) == 0
    assert (a / "forces.pgm").read_bytes() == (b / "readi.pgm").read_bytes()
    assert cli.read_pgm(a / "forces.pgm").shape == np.load(a / "forces.npy").shape


def test_runs_are_deterministic(tmp_path):
    for d in ("x", "y"):
        assert run("emc2", "--scenario", POINT, "--out", tmp_path / d, "--seed", 4, *FAST) == 0
    for name in ("emc2.pgm", "emc2.npy", "metrics.csv", "motion_02.csv", "resolved_config.json"):
        assert (tmp_path / "x" / name).read_bytes() == (tmp_path / "y" / name).read_bytes(), name


def test_override_recorded_in_resolved_config(tmp_path):
    assert run("readi", "--scenario", POINT, "--out", tmp_path, "--seed", 7, "--set", "grouping.S=2",
               "--set", "grouping.Q=8", *FAST) == 0
    cfg = json.loads((tmp_path / "resolved_config.json").read_text())
    assert cfg["grouping"] == {"S": 2, "Q": 8} and cfg["seed"] == 7
    assert sorted(p.name for p in tmp_path.glob("readi_low_res_*.pgm")) == ["readi_low_res_01.pgm",
                                                                            "readi_low_res_02.pgm"]


def test_figures_written(tmp_path):
    assert run("emc2", "--scenario", POINT, "--out", tmp_path) == 0
    for name in ("emc2.png", "uncompensated.png", "motion_02.png", "emc2_profiles.png"):
        assert (tmp_path / name).read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_filter_and_metrics(tmp_path):
    assert run("filter", "--scenario", POINT, "--out", tmp_path / "f", "--set", "filter.n_ensembles=2",
               "--set", "filter.keep=\"2-8\"") == 0
    rows = dict(line.split(",")[0::2] for line in (tmp_path / "f" / "metrics.csv").read_text().splitlines()[1:])
    assert rows["filter_n_frames"] == "8" and rows["filter_n_kept"] == "7"
    assert np.load(tmp_path / "f" / "filtered_frames.npy").shape[0] == 8
    assert (tmp_path / "f" / "singular_values.png").exists()
    assert run("metrics", "--scenario", POINT, "--out", tmp_path / "m", *FAST) == 0
    rows = dict(line.split(",")[0::2] for line in (tmp_path / "m" / "metrics.csv").read_text().splitlines()[1:])
    assert float(rows["readi_forces_rel_l2"]) < 1e-5


def test_input_container(tmp_path):
    assert run("simulate", "--scenario", POINT, "--out", tmp_path / "s", *FAST) == 0
    enc = tmp_path / "s" / "encoded.readi"
    assert run("beamform", "--scenario", POINT, "--input", enc, "--out", tmp_path / "b", *FAST) == 0
    assert run("beamform", "--scenario", POINT, "--out", tmp_path / "c", *FAST) == 0
    assert (tmp_path / "b" / "forces.pgm").read_bytes() == (tmp_path / "c" / "forces.pgm").read_bytes()


def test_error_exit_codes(tmp_path, capsys, monkeypatch):
    missing = tmp_path / "nope.json"
    assert run("readi", "--scenario", missing, "--out", tmp_path) == 2
    assert str(missing) in capsys.readouterr().err
    assert run("readi", "--scenario", POINT, "--out", tmp_path, "--set", "grouping.S=3") == 2
    assert "grouping" in capsys.readouterr().err
    assert run("readi", "--scenario", POINT, "--out", tmp_path, "--set", "grid.bogus=1") == 2
    assert run("readi", "--out", tmp_path) == 2
    monkeypatch.delenv(cli.OUT_ENV, raising=False)
    assert run("readi", "--scenario", POINT) == 2
    assert "--out" in capsys.readouterr().err
    with pytest.raises(SystemExit) as info:
        run("unknown")
    assert info.value.code == 2

    bad = tmp_path / "bad.readi"
    bad.write_bytes(b"READI1" + b"\0" * 10)
    assert run("beamform", "--scenario", POINT, "--input", bad, "--out", tmp_path) == 1
    assert "TruncatedError" in capsys.readouterr().err
    assert run("simulate", "--scenario", POINT, "--out", tmp_path / "s", *FAST) == 0
    assert run("beamform", "--scenario", POINT, "--input", tmp_path / "s" / "encoded.readi", "--out", tmp_path,
               "--set", "geometry.n_elements=32", "--set", "grouping.Q=8") == 1
    assert "dimension mismatch" in capsys.readouterr().err


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert run("beamform", "--scenario", POINT, *FAST) == 0
    assert (tmp_path / "env" / "forces.pgm").exists()


def test_demo_subset(tmp_path, capsys):
    assert run("demo", "--criteria", "2,3", "--out", tmp_path) == 0
    out = capsys.readouterr().out
    assert "2/2 criteria passed" in out
    assert (tmp_path / "demo_criteria.png").exists()
    assert "c2_passed,demo,1" in (tmp_path / "demo.csv").read_text()
    assert run("demo", "--criteria", "9", "--out", tmp_path) == 2


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "readi_lab.cli", "beamform", "--scenario", POINT,
                           "--out", str(tmp_path), *FAST], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "readi-lab beamform" in proc.stdout
