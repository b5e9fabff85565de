"""Pytest file for the command line in cli.py"""
import csv
import json
from io import StringIO

import pytest
from lxml import etree
from pytest import raises

from gprotor.cli import EXIT_USAGE, build_config, build_parser, main


def _run(argv):
    out = StringIO()
    status = main(argv, out=out)
    return status, out.getvalue()


def _rows(text):
    return list(csv.DictReader(StringIO(text)))


def test_vortex_csv():
    status, text = _run(["vortex", "--n", "0", "--a", "0"])
    assert status == 0
    rows = _rows(text)
    assert len(rows) == 1
    assert float(rows[0]["E_n"]) == pytest.approx(2.0, abs=1e-3)
    assert list(rows[0]) == ["n", "a", "omega", "E_n", "mu_tilde", "E_gp", "mu", "residual",
                             "iterations"]


def test_vortex_output_and_bounds(tmp_path):
    path = tmp_path / "profile.txt"
    status, text = _run(["--format", "json", "vortex", "--n", "2", "--a", "50", "--check-bounds",
                         "--output", str(path)])
    assert status == 0
    row = json.loads(text)[0]
    assert row["n"] == 2
    assert row["E_gp"] == pytest.approx(row["E_n"])
    assert path.read_text(encoding="utf-8").startswith("# n=2")


def test_usage_errors():
    with raises(SystemExit) as error:
        main(["vortex", "--a", "1"], out=StringIO())
    assert error.value.code == 2
    with raises(SystemExit):
        main(["--format", "yaml", "vortex", "--n", "1"], out=StringIO())
    assert _run(["vortex", "--n", "1", "--omega", "2.5"])[0] == EXIT_USAGE
    assert _run(["--trap", "homogeneous:steep", "vortex", "--n", "1"])[0] == EXIT_USAGE
    assert _run(["--config", "missing.xml", "vortex", "--n", "1"])[0] == EXIT_USAGE


def test_critical_rows():
    status, text = _run(["critical", "--a", "1,10", "--n-max", "2"])
    assert status == 0
    rows = _rows(text)
    assert len(rows) == 6
    assert [int(row["n"]) for row in rows[:3]] == [0, 1, 2]
    assert all(0 < float(row["Omega_n"]) < 2 for row in rows)


def test_deterministic_output():
    argv = ["--format", "text", "critical", "--a", "1", "--n-max", "1"]
    assert _run(argv) == _run(argv)


def test_bounds_text():
    status, text = _run(["--format", "text", "bounds", "--n", "0-1", "--a", "10"])
    assert status == 0
    assert "VIOLATED" not in text
    assert "critical a=10" in text


def test_stability_xml():
    status, text = _run(["--format", "xml", "stability", "--n", "1", "--a", "1"])
    assert status == 0
    root = etree.fromstring(text.encode("utf-8"))
    assert root.get("verdict") == "unstable"


def test_dm_rows(tmp_path):
    path = tmp_path / "dm.txt"
    status, text = _run(["dm", "--a", "3", "--omega", "0.5", "--jmax", "3", "--output", str(path)])
    assert status == 0
    rows = _rows(text)
    assert [int(row["j"]) for row in rows] == [0, 1, 2, 3]
    assert float(rows[0]["lambda"]) == pytest.approx(1.0)
    assert int(rows[0]["rank"]) == 1
    assert "# j lambda sector_energy" in path.read_text(encoding="utf-8")


def test_config_file_wins(tmp_path):
    path = tmp_path / "run.xml"
    path.write_text('<gprotor><run format="json"/><radial step="0.02"/></gprotor>',
                    encoding="utf-8")
    args = build_parser().parse_args(["--config", str(path), "--format", "xml", "--step", "0.05",
                                      "vortex", "--n", "0"])
    config = build_config(args)
    assert config.format == "json"
    assert config.radial.step == 0.02
    status, text = _run(["--config", str(path), "--format", "xml", "vortex", "--n", "0"])
    assert status == 0
    assert json.loads(text)[0]["n"] == 0


def test_jobs_from_environment(monkeypatch):
    monkeypatch.setenv("GPROTOR_THREADS", "3")
    config = build_config(build_parser().parse_args(["vortex", "--n", "0"]))
    assert config.jobs == 3
    assert config.solver2d.jobs == 3
    config = build_config(build_parser().parse_args(["--jobs", "2", "vortex", "--n", "0"]))
    assert config.jobs == 2


def test_breaking_sweep(tmp_path):
    status, text = _run(["--points", "32", "--restarts", "1", "breaking", "--a", "0,1",
                         "--omega", "0.5", "--n-max", "2", "--field-dir", str(tmp_path)])
    assert status == 0
    rows = _rows(text)
    assert [float(row["a"]) for row in rows] == [0.0, 1.0]
    assert all(row["breaking"] == "false" for row in rows)
    assert int(rows[0]["best_n"]) == 0
    assert int(rows[0]["dm_rank"]) == 1
    assert len(list(tmp_path.glob("field_*.txt"))) == 2
