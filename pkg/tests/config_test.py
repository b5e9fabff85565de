"""Pytest file for config.py"""
import logging

import numpy as np
import pytest
from pytest import raises

from gprotor.config import RunConfig, jobs_from_environment, load_config, read_config
from gprotor.model import GpParameters, Grid2D

FULL = """<?xml version="1.0" encoding="utf-8"?>
<gprotor>
  <!-- every section -->
  <trap kind="homogeneous" exponent="4"/>
  <radial step="0.02" margin="30" tolerance="1e-11" restarts="2" seed="5"/>
  <grid2d points="32" extent="5"/>
  <solver2d restarts="3" tolerance="1e-7" strict="yes" m_max="8"/>
  <stability channels="8" eigensolver="arpack" certificates="false"/>
  <dm jmax="5" damping="0.5"/>
  <run jobs="2" format="json"/>
</gprotor>
"""


def _write(tmp_path, text, name="run.xml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_defaults():
    config = RunConfig()
    assert config.trap.is_harmonic
    assert config.format == "csv"
    assert config.jobs == 1
    assert config.grid2d(GpParameters(1)) == Grid2D.for_trap(config.trap, GpParameters(1),
                                                            config.grid_points)


def test_full_file(tmp_path):
    config = load_config(_write(tmp_path, FULL))
    assert config.trap.exponent == 4
    assert config.radial.step == 0.02
    assert config.radial.margin == 30
    assert config.radial.energy_tolerance == 1e-11
    assert config.radial.restarts == 2
    assert config.radial.seed == 5
    assert config.solver2d.restarts == 3
    assert config.solver2d.tolerance == 1e-7
    assert config.solver2d.strict
    assert config.solver2d.m_max == 8
    assert config.stability.channels == 8
    assert config.stability.eigensolver == "arpack"
    assert not config.stability.certificates
    assert config.dm.j_max == 5
    assert config.dm.damping == 0.5
    assert config.jobs == 2
    assert config.format == "json"
    assert config.grid2d(GpParameters(1)) == Grid2D(32, 5.0)
    spread = config.with_jobs()
    assert spread.solver2d.jobs == 2
    assert spread.solver2d.points == 32
    assert spread.stability.jobs == 2
    assert spread.dm.jobs == 2


def test_file_wins_over_base(tmp_path):
    base = RunConfig(format="text", jobs=4)
    config = load_config(_write(tmp_path, '<gprotor><run format="xml"/></gprotor>'), base)
    assert config.format == "xml"
    assert config.jobs == 4


def test_tabulated_trap_relative_to_file(tmp_path):
    r = np.linspace(0, 10, 101)
    np.savetxt(tmp_path / "table.txt", np.column_stack([r, r**2]))
    config = load_config(_write(tmp_path, '<gprotor><trap kind="tabulated" file="table.txt"/>'
                                          "</gprotor>"))
    assert config.trap.r_limit == 10
    assert config.trap.omega_c == pytest.approx(2.0)


def test_unknown_names_are_ignored(tmp_path, caplog):
    text = '<gprotor><plot colour="red"/><radial step="0.02" speed="11"/></gprotor>'
    with caplog.at_level(logging.WARNING, logger="gprotor.config"):
        config = load_config(_write(tmp_path, text))
    assert config.radial.step == 0.02
    assert "unknown configuration element <plot>" in caplog.text
    assert "unknown attribute speed on <radial>" in caplog.text


def test_bad_files(tmp_path):
    with raises(FileNotFoundError):
        load_config(tmp_path / "missing.xml")
    with raises(ValueError):
        read_config(_write(tmp_path, "<gprotor><radial step='0.1'></gprotor>"))
    with raises(ValueError):
        read_config(_write(tmp_path, "<settings/>"))
    with raises(ValueError):
        load_config(_write(tmp_path, '<gprotor><radial step="fine"/></gprotor>'))
    with raises(ValueError):
        load_config(_write(tmp_path, '<gprotor><solver2d strict="sometimes"/></gprotor>'))
    with raises(ValueError):
        load_config(_write(tmp_path, '<gprotor><trap kind="homogeneous"/></gprotor>'))
    with raises(ValueError):
        load_config(_write(tmp_path, '<gprotor><trap kind="lattice"/></gprotor>'))
    with raises(ValueError):
        load_config(_write(tmp_path, '<gprotor><run format="yaml"/></gprotor>'))


def test_run_config_validation():
    with raises(ValueError):
        RunConfig(format="yaml")
    with raises(ValueError):
        RunConfig(jobs=0)


def test_jobs_from_environment(monkeypatch):
    monkeypatch.delenv("GPROTOR_THREADS", raising=False)
    assert jobs_from_environment() == 1
    assert jobs_from_environment(3) == 3
    monkeypatch.setenv("GPROTOR_THREADS", "6")
    assert jobs_from_environment() == 6
    monkeypatch.setenv("GPROTOR_THREADS", "many")
    assert jobs_from_environment(2) == 2
    monkeypatch.setenv("GPROTOR_THREADS", "0")
    assert jobs_from_environment() == 1


def test_attribute_text_is_trimmed(tmp_path):
    text = '<gprotor><stability eigensolver=" arpack " certificates="off"/>' \
           '<dm jmax="6.0"/><run format=" json"/></gprotor>'
    config = load_config(_write(tmp_path, text))
    assert config.stability.eigensolver == "arpack"
    assert config.stability.certificates is False
    assert config.dm.j_max == 6
    assert config.format == "json"
    with raises(ValueError):
        load_config(_write(tmp_path, '<gprotor><stability eigensolver=""/></gprotor>'))
