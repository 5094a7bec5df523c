import csv
import json

import pytest

from picosync.cli import main
from picosync.config import ExperimentConfig
from picosync.presets import PRESETS, get_preset, list_presets


def test_catalog_size_and_validity():
    assert len(list_presets()) >= 8
    for name, cfg in PRESETS.items():
        assert cfg.name == name
        cfg.validate()


def test_cabled_reference_preset():
    cfg = get_preset("cabled-36db")
    assert (cfg.iterations, cfg.topology, cfg.snr_db, cfg.tone_separation) == (60, "4conn-ring", 36.0, 40e6)


def test_sweep_presets():
    bw = get_preset("bw-sweep")
    assert bw.sweep_axis == "tone_separation" and bw.sweep_values == [10e6, 20e6, 30e6, 40e6, 50e6]
    snr = get_preset("snr-sweep")
    assert snr.sweep_axis == "snr_db" and min(snr.sweep_values) == 14 and max(snr.sweep_values) == 36


def test_get_preset_is_a_copy():
    get_preset("bw-sweep").sweep_values.append(1.0)
    assert len(PRESETS["bw-sweep"].sweep_values) == 5


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_every_preset_runs(tmp_path, name):
    args = ["run", "--preset", name, "--out", str(tmp_path), "--override", "trials=2",
            "--override", "iterations=2"]
    if PRESETS[name].sweep_axis:
        args += ["--override", f"sweep_values={PRESETS[name].sweep_values[0]}"]
    assert main(args) == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config"]["name"] == name
    for out in manifest["outputs"]:
        assert (tmp_path / out).exists()


def test_run_outputs_and_determinism(tmp_path):
    args = ["run", "--preset", "cabled-36db", "--override", "trials=2", "--override", "iterations=4",
            "--seed", "9"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "offsets.csv").read_text()
    assert a == (tmp_path / "b" / "offsets.csv").read_text()
    rows = list(csv.DictReader(a.splitlines()))
    assert len(rows) == 2 * 4 * 4
    assert set(rows[0]) == {"trial", "iteration", "i", "j", "measured_s", "truth_s", "measured_dbps", "truth_dbps"}
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summary["std_defined"] is True and "convergence_iteration" in summary
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["seed"] == 9 and manifest["duration_s"] > 0
    assert (tmp_path / "a" / "crlb.csv").read_text().startswith("trial,i,j,snr_db,crlb_std_s")


def test_config_file_and_sweep(tmp_path):
    cfg = tmp_path / "sweep.cfg"
    cfg.write_text("trials = 2\niterations = 2\nsweep_axis = snr_db\nsweep_values = 20, 30\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rows = list(csv.DictReader((tmp_path / "o" / "sweep.csv").read_text().splitlines()))
    assert [float(r["snr_db"]) for r in rows] == [20.0, 30.0]
    assert float(rows[0]["crlb_std_s"]) > float(rows[1]["crlb_std_s"])


def test_config_errors_exit_1(tmp_path, capsys):
    assert main(["run", "--preset", "nope"]) == 1
    assert main(["run", "--override", "iterations=abc", "--out", str(tmp_path)]) == 1
    assert "iterations" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == 1
    assert main(["run", "--jobs", "0"]) == 1


def test_runtime_error_exits_2(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["run", "--out", str(blocker / "sub"), "--override", "iterations=1"]) == 2


def test_list_presets(capsys):
    assert main(["list-presets"]) == 0
    assert "bw-sweep" in capsys.readouterr().out


def test_bad_override_syntax():
    with pytest.raises(SystemExit):
        main(["run", "--override", "novalue"])


def test_default_config_is_wireless():
    assert ExperimentConfig().link_profile == "wireless"
