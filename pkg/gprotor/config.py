"""Run configuration: solver options gathered from defaults, command-line flags and an XML file.

A configuration file looks like

    <gprotor>
      <trap kind="homogeneous" exponent="4"/>
      <radial step="0.01" margin="40" tolerance="1e-10" residual="1e-8"/>
      <grid2d points="128" extent="0"/>
      <solver2d restarts="8" tolerance="1e-6" max_iterations="4000" seed="0"/>
      <stability channels="16"/>
      <dm jmax="0" tolerance="1e-9"/>
      <run jobs="1" format="csv"/>
    </gprotor>

Every attribute is optional. Values found in the file win over command-line flags.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, Tuple

from lxml import etree as et

from gprotor.constants import GRID_POINTS
from gprotor.dm_solver import DmOptions
from gprotor.helpers import (
    bool_or_default,
    float_or_none,
    int_or_default,
    int_or_none,
    str_or_default,
)
from gprotor.model import GpParameters, Grid2D, TrapPotential
from gprotor.radial_solver import RadialOptions
from gprotor.solver2d import Solver2DOptions
from gprotor.stability import StabilityOptions

log = logging.getLogger(__name__)

THREADS_VARIABLE = "GPROTOR_THREADS"
FORMATS = ("csv", "json", "xml", "text")


def _text(value):
    return str_or_default(value, None)


def _bool(value):
    return bool_or_default(value, None)


# element -> attribute -> (option field, converter); converters return None for bad input
ATTRIBUTES: Dict[str, Dict[str, Tuple[str, Callable]]] = {
    "radial": {
        "step": ("step", float_or_none),
        "margin": ("margin", float_or_none),
        "tolerance": ("energy_tolerance", float_or_none),
        "residual": ("residual_tolerance", float_or_none),
        "max_iterations": ("max_iterations", int_or_none),
        "restarts": ("restarts", int_or_none),
        "seed": ("seed", int_or_none),
    },
    "solver2d": {
        "restarts": ("restarts", int_or_none),
        "tolerance": ("tolerance", float_or_none),
        "max_iterations": ("max_iterations", int_or_none),
        "seed": ("seed", int_or_none),
        "m_max": ("m_max", int_or_none),
        "threshold": ("channel_threshold", float_or_none),
        "gap": ("gap_factor", float_or_none),
        "strict": ("strict", _bool),
    },
    "stability": {
        "channels": ("channels", int_or_none),
        "tolerance": ("tolerance", float_or_none),
        "eigensolver": ("eigensolver", _text),
        "certificates": ("certificates", _bool),
    },
    "dm": {
        "jmax": ("j_max", int_or_none),
        "tolerance": ("tolerance", float_or_none),
        "damping": ("damping", float_or_none),
        "max_iterations": ("max_iterations", int_or_none),
    },
    "grid2d": {
        "points": ("grid_points", int_or_none),
        "extent": ("grid_extent", float_or_none),
    },
    "run": {
        "jobs": ("jobs", int_or_none),
        "format": ("format", _text),
    },
}


@dataclass
class RunConfig:
    """Everything a command needs besides its physical parameters.

    Parameters:
        trap: the confining potential
        radial, solver2d, stability, dm: options of the individual solvers
        grid_points: nodes per side of 2D grids
        grid_extent: half width of 2D grids; 0 sizes the grid from the trap
        jobs: worker threads
        format: output format, one of csv, json, xml, text
    """

    trap: TrapPotential = field(default_factory=TrapPotential.harmonic)
    radial: RadialOptions = field(default_factory=RadialOptions)
    solver2d: Solver2DOptions = field(default_factory=Solver2DOptions)
    stability: StabilityOptions = field(default_factory=StabilityOptions)
    dm: DmOptions = field(default_factory=DmOptions)
    grid_points: int = GRID_POINTS
    grid_extent: float = 0.0
    jobs: int = 1
    format: str = "csv"

    def __post_init__(self):
        if self.format not in FORMATS:
            raise ValueError(f"Unknown output format {self.format}; use one of {FORMATS}")
        if self.jobs < 1:
            raise ValueError(f"The number of jobs must be positive, got {self.jobs}")

    def grid2d(self, params: GpParameters) -> Grid2D:
        if self.grid_extent > 0:
            return Grid2D(self.grid_points, self.grid_extent)
        return Grid2D.for_trap(self.trap, params, self.grid_points)

    def with_jobs(self) -> RunConfig:
        """Pass the job count on to the solver options."""
        return replace(
            self,
            solver2d=replace(self.solver2d, jobs=self.jobs, points=self.grid_points),
            stability=replace(self.stability, jobs=self.jobs),
            dm=replace(self.dm, jobs=self.jobs),
        )


def jobs_from_environment(default: int = 1) -> int:
    """The GPROTOR_THREADS variable, or the default when it is unset or unreadable."""
    return max(1, int_or_default(os.environ.get(THREADS_VARIABLE), default))


def read_config(path: str | Path) -> et._Element:
    """Parse a configuration file and return its <gprotor> root element."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"No configuration file at {path}")
    try:
        tree = et.parse(str(path))
    except et.XMLSyntaxError as error:
        raise ValueError(f"Configuration file {path} is not valid XML: {error}") from error
    root = tree.getroot()
    if root.tag != "gprotor":
        raise ValueError(f"Configuration root element must be <gprotor>, found <{root.tag}>")
    return root


def _read_attributes(element: et._Element) -> Dict[str, object]:
    known = ATTRIBUTES[element.tag]
    values = {}
    for name, raw in element.attrib.items():
        if name not in known:
            log.warning("Ignoring unknown attribute %s on <%s>", name, element.tag)
            continue
        option, converter = known[name]
        value = converter(raw)
        if value is None:
            raise ValueError(f"Could not read {name}='{raw}' on <{element.tag}>")
        values[option] = value
    return values


def _read_trap(element: et._Element, base: Path | None) -> TrapPotential:
    kind = element.attrib.get("kind", "harmonic").lower()
    if kind == "harmonic":
        return TrapPotential.harmonic()
    if kind == "homogeneous":
        exponent = float_or_none(element.attrib.get("exponent"))
        if exponent is None:
            raise ValueError("A homogeneous <trap> needs an exponent attribute")
        return TrapPotential.homogeneous(exponent)
    if kind == "tabulated":
        name = element.attrib.get("file")
        if not name:
            raise ValueError("A tabulated <trap> needs a file attribute")
        path = Path(name)
        if base is not None and not path.is_absolute():
            path = base / path
        return TrapPotential.from_file(path)
    raise ValueError(f"Unknown trap kind {kind}")


def apply_config(root: et._Element, config: RunConfig, base: Path | None = None) -> RunConfig:
    """Override the fields of config with everything set in the file."""
    for element in root:
        if not isinstance(element.tag, str):
            continue
        if element.tag == "trap":
            config = replace(config, trap=_read_trap(element, base))
            continue
        if element.tag not in ATTRIBUTES:
            log.warning("Ignoring unknown configuration element <%s>", element.tag)
            continue
        values = _read_attributes(element)
        if element.tag in ("grid2d", "run"):
            config = replace(config, **values)
        else:
            options = getattr(config, element.tag)
            config = replace(config, **{element.tag: replace(options, **values)})
        log.debug("Configuration <%s>: %s", element.tag, values)
    return config


def load_config(path: str | Path, config: RunConfig | None = None) -> RunConfig:
    """Read a configuration file on top of config (or the defaults)."""
    path = Path(path)
    root = read_config(path)
    return apply_config(root, config or RunConfig(), base=path.parent)
