import json

import pytest

from splatmesh.cli import main


def test_gen_verify_round(tmp_path, capsys):
    f, cam = tmp_path / "g.gsfc", tmp_path / "cam.json"
    assert main(["gen", "--count", "20", "--seed", "3", "--out", str(f), "--camera", str(cam)]) == 0
    assert main(["verify", str(f), "--camera", str(cam), "--json"]) == 0
    out = capsys.readouterr().out
    doc = json.loads(out[out.index("{"):])
    assert doc["passed"] and doc["n_checked"] == 20


def test_verify_truncated_file(tmp_path, capsys):
    f = tmp_path / "g.gsfc"
    main(["gen", "--count", "5", "--out", str(f)])
    f.write_bytes(f.read_bytes()[:-3])
    assert main(["verify", str(f)]) == 2
    err = capsys.readouterr().err
    assert "must be 1180 bytes, found 1177" in err and "byte offset" in err


def test_run_prints_table(capsys):
    assert main(["run", "--method", "window", "--profile", "calibrated", "--mode", "analytic"]) == 0
    out = capsys.readouterr().out
    assert "| window (calibrated) | profile | Avg | 371 | 83 | 184 | 130 | 57 | 89 | 194 |" in out


def test_run_with_profile_file(tmp_path, capsys):
    ini = tmp_path / "p.ini"
    assert main(["profile", "--method", "stream", "--out", str(ini)]) == 0
    assert main(["run", "--method", "window", "--profile", str(ini), "--mode", "analytic", "--n-gaussians", "50"]) == 0
    assert "| 433 |" in capsys.readouterr().out


def test_run_writes_files_and_report(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--preset", "window-4", "--mode", "both", "--out", str(out)]) == 0
    assert (out / "window-4.json").exists()
    assert main(["report", str(out / "window-4.json"), "--format", "csv"]) == 0
    text = capsys.readouterr().out
    assert "window-4,window,4,event" in text


def test_run_capacity_error(capsys):
    assert main(["run", "--method", "window", "--units", "51", "--mode", "analytic"]) == 2
    assert "preset 'window-51'" in capsys.readouterr().err


def test_sweep_and_place(capsys, tmp_path):
    assert main(["sweep", "--mode", "analytic", "--n-gaussians", "100", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "full.csv").read_text().splitlines()
    assert len(rows) == 8
    assert main(["place", "--method", "naive", "--units", "3"]) == 0
    assert "3 units, 15 tiles of 400" in capsys.readouterr().out


def test_external_cap_flag(capsys):
    main(["run", "--method", "window", "--units", "8", "--mode", "analytic", "--external-cap", "45.8"])
    assert "| window-8 | analytic | 45.80 |" in capsys.readouterr().out


def test_preset_and_method_conflict():
    with pytest.raises(SystemExit):
        main(["run", "--preset", "window-1", "--method", "naive"])
