"""Command-line front end.

    gprotor vortex --n 2 --a 50 --check-bounds
    gprotor critical --a 0,1,10,100 --n-max 4
    gprotor stability --n 2 --a 50 --omega 0.5
    gprotor breaking --a log:1:1000:7 --omega 0.5
    gprotor dm --a 100 --omega 0.5
    gprotor multi --a 100 --omega 0.5 --components 1-3
    gprotor bounds --n 0-4 --a 1,10,100

Exit codes: 0 success, 2 bad arguments, 3 a bound or identity was violated, 4 a solver did not
converge.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import IO, Dict, List, Sequence

import numpy as np
from lxml import etree as et

from gprotor.analytic_bounds import (
    BoundReport,
    BoundSuite,
    constants_suite,
    profile_bound_suite,
    render_suite,
)
from gprotor.config import FORMATS, RunConfig, jobs_from_environment, load_config
from gprotor.critical import (
    CSV_COLUMNS,
    VortexLadder,
    critical_table,
    frequency_chain_ok,
    table_rows,
    table_to_csv,
)
from gprotor.dm_solver import (
    dm_state_to_text,
    equality_regime,
    minimize_dm,
    prop_condition,
)
from gprotor.helpers import parse_comma_equals_str_into_dict, parse_int_list, parse_range
from gprotor.model import ConvergenceError, GpParameters, TrapPotential
from gprotor.multicomponent import trichotomy_to_xml, verify_trichotomy
from gprotor.radial_solver import minimize_vortex, profile_to_text
from gprotor.solver2d import detect_breaking, field_to_text, minimize_2d
from gprotor.stability import analyze_stability, report_to_xml

log = logging.getLogger(__name__)

EXIT_USAGE = 2
EXIT_VIOLATION = 3
EXIT_CONVERGENCE = 4

BREAKING_COLUMNS = [
    "omega", "a", "E_gp", "E_dm", "E_vortex", "best_n", "gap", "channels", "breaking",
    "dm_rank", "nonradiality", "vortices", "converged",
]


def _format_value(value):
    if isinstance(value, float):
        return repr(float(value))
    if isinstance(value, (bool, np.bool_)):
        return str(value).lower()
    return value


def write_rows(rows: Sequence[Dict], columns: Sequence[str], fmt: str, stream: IO[str],
               tag: str = "row"):
    """Write rows in one of the output formats; every format keeps the column order."""
    if fmt == "csv":
        writer = csv.DictWriter(stream, fieldnames=list(columns), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _format_value(row[key]) for key in columns})
    elif fmt == "json":
        json.dump([{key: row[key] for key in columns} for row in rows], stream, indent=2)
        stream.write("\n")
    elif fmt == "xml":
        root = et.Element("gprotor")
        for row in rows:
            et.SubElement(root, tag, {key: str(_format_value(row[key])) for key in columns})
        stream.write(et.tostring(root, pretty_print=True, encoding="unicode"))
    else:
        cells = [[str(_format_value(row[key])) for key in columns] for row in rows]
        widths = [max([len(c)] + [len(line[i]) for line in cells]) for i, c in enumerate(columns)]
        stream.write("  ".join(c.ljust(w) for c, w in zip(columns, widths)).rstrip() + "\n")
        for line in cells:
            stream.write("  ".join(c.ljust(w) for c, w in zip(line, widths)).rstrip() + "\n")


def _params(args) -> GpParameters:
    return GpParameters(args.a, args.omega)


def cmd_vortex(args, config: RunConfig, out: IO[str]) -> int:
    params = _params(args)
    profile = minimize_vortex(args.n, params, config.trap, opts=config.radial)
    row = {
        "n": profile.n,
        "a": params.a,
        "omega": params.omega,
        "E_n": profile.energy,
        "mu_tilde": profile.mu_tilde,
        "E_gp": profile.gp_energy,
        "mu": profile.mu,
        "residual": profile.residual,
        "iterations": profile.iterations,
    }
    write_rows([row], list(row), config.format, out, "vortex")
    if args.output:
        Path(args.output).write_text(profile_to_text(profile), encoding="utf-8")
        log.info("Wrote profile to %s", args.output)
    if args.check_bounds:
        suite = profile_bound_suite(profile)
        summary = render_suite(suite)
        print(summary, file=out if config.format == "text" else sys.stderr)
        if not suite.satisfied:
            return EXIT_VIOLATION
    return 0


def cmd_critical(args, config: RunConfig, out: IO[str]) -> int:
    a_values = parse_range(args.a)
    ladder = VortexLadder(config.trap, config.radial, n_top=args.n_max + 1)
    tables = [critical_table(a, args.n_max, config.trap, ladder, config.jobs) for a in a_values]
    if config.format == "csv":
        table_to_csv(tables, out)
    else:
        write_rows(table_rows(tables), CSV_COLUMNS, config.format, out, "critical")
    status = 0
    for table in tables:
        for entry in table.violations():
            print(f"violation: n={entry.n} a={table.a:g} Omega_n={entry.omega!r} "
                  f"not in [{entry.lower!r}, {entry.upper!r}]", file=sys.stderr)
            status = EXIT_VIOLATION
        if not frequency_chain_ok(table):
            print(f"violation: Omega_(n+1) <= (2n+3)/(2n+1) Omega_n fails at a={table.a:g}",
                  file=sys.stderr)
            status = EXIT_VIOLATION
    return status


def cmd_stability(args, config: RunConfig, out: IO[str]) -> int:
    params = _params(args)
    profile = minimize_vortex(args.n, GpParameters(args.a), config.trap, opts=config.radial)
    report = analyze_stability(profile, params, config.stability)
    if config.format == "xml":
        out.write(report_to_xml(report))
    elif config.format == "text":
        out.write(str(report) + "\n")
    else:
        rows = [{"kind": "channel", "name": str(m), "value": value}
                for m, value in report.channels]
        rows += [{"kind": "certificate", "name": name, "value": value}
                 for name, value in report.certificates]
        rows.append({"kind": "verdict", "name": report.verdict.value,
                     "value": report.lowest[1]})
        write_rows(rows, ["kind", "name", "value"], config.format, out, "stability")
    return 0


def _breaking_point(omega: float, a: float, args, config: RunConfig,
                    ladder: VortexLadder) -> Dict:
    params = GpParameters(a, omega)
    row = {key: "" for key in BREAKING_COLUMNS}
    row.update(omega=omega, a=a)
    try:
        vortices = {n: ladder.energy(n, a) for n in range(args.n_max + 1)}
        minimizer = minimize_2d(params, config.trap, config.grid2d(params), config.solver2d)
        diagnosis = detect_breaking(minimizer, vortices, params, config.solver2d)
        row.update(
            E_gp=minimizer.energy,
            E_vortex=diagnosis.gap + minimizer.energy,
            best_n=diagnosis.best_vortex,
            gap=diagnosis.gap,
            channels=";".join(str(m) for m in diagnosis.occupied),
            breaking=diagnosis.breaking,
            nonradiality=diagnosis.nonradiality,
            vortices=diagnosis.vortices,
            converged=minimizer.converged,
        )
        if args.field_dir:
            path = Path(args.field_dir) / f"field_omega{omega:g}_a{a:g}.txt"
            path.write_text(field_to_text(minimizer.phi), encoding="utf-8")
        if not args.no_dm:
            state = minimize_dm(params, config.trap, opts=config.dm)
            row.update(E_dm=state.energy, dm_rank=state.rank)
    except ConvergenceError as error:
        if config.solver2d.strict:
            raise
        log.warning("No converged result at omega=%g a=%g: %s", omega, a, error)
        row["converged"] = False
    return row


def cmd_breaking(args, config: RunConfig, out: IO[str]) -> int:
    a_values = parse_range(args.a)
    omegas = parse_range(args.omega)
    ladder = VortexLadder(config.trap, config.radial, n_top=args.n_max)
    points = [(omega, a) for omega in omegas for a in a_values]
    inner = replace(config, jobs=1).with_jobs()
    with ThreadPoolExecutor(max_workers=config.jobs) as executor:
        rows = list(executor.map(
            lambda point: _breaking_point(point[0], point[1], args, inner, ladder), points
        ))
    rows.sort(key=lambda row: (row["omega"], row["a"]))
    write_rows(rows, BREAKING_COLUMNS, config.format, out, "point")
    return 0


def cmd_dm(args, config: RunConfig, out: IO[str]) -> int:
    params = _params(args)
    initial = None
    if args.initial:
        weights: Dict[int, float] = {}
        parse_comma_equals_str_into_dict(args.initial, weights)
        if not weights:
            raise ValueError(f"Could not read initial occupations {args.initial}")
        dm = config.dm
        j_max = max(max(weights), dm.j_max)
        config = replace(config, dm=replace(dm, j_max=j_max))
        initial = [weights.get(j, 0.0) for j in range(j_max + 1)]
    state = minimize_dm(params, config.trap, opts=config.dm, initial_occupations=initial)
    if args.output:
        Path(args.output).write_text(dm_state_to_text(state), encoding="utf-8")
    if config.format == "text":
        out.write(dm_state_to_text(state))
    else:
        rows = [
            {"j": j, "lambda": float(weight), "sector_energy": float(energy),
             "E_dm": state.energy, "mu_dm": state.mu_dm, "rank": state.rank}
            for j, weight, energy in zip(state.sectors, state.occupations, state.sector_energies)
        ]
        write_rows(rows, ["j", "lambda", "sector_energy", "E_dm", "mu_dm", "rank"],
                   config.format, out, "sector")
    regime = []
    if prop_condition(state, config.trap):
        regime.append("zero angular momentum condition holds")
    if config.trap.is_harmonic and equality_regime(params, config.trap):
        regime.append("a <= pi (2 - omega)")
    if regime:
        log.info("DM at a=%g omega=%g: %s", params.a, params.omega, "; ".join(regime))
    return 0


def cmd_multi(args, config: RunConfig, out: IO[str]) -> int:
    params = _params(args)
    n_c_values = parse_int_list(args.components) if args.components else None
    report = verify_trichotomy(params, config.trap, config.grid2d(params), config.solver2d,
                               config.dm, n_c_values=n_c_values, tolerance=args.tolerance)
    if config.format == "xml":
        out.write(trichotomy_to_xml(report))
    elif config.format == "text":
        out.write(str(report) + "\n")
    else:
        rows = [
            {"n_c": row.n_c, "energy": row.energy, "case": "/".join(row.cases),
             "separation": row.separation,
             "sector_bound": "" if row.sector_bound is None else row.sector_bound,
             "ok": row.ok, "E_dm": report.e_dm, "E_gp": report.e_gp, "n_dm": report.n_dm}
            for row in report.rows
        ]
        columns = ["n_c", "energy", "case", "separation", "sector_bound", "ok", "E_dm", "E_gp",
                   "n_dm"]
        write_rows(rows, columns, config.format, out, "components")
    for violation in report.violations:
        print(f"violation: {violation}", file=sys.stderr)
    return 0 if report.ok else EXIT_VIOLATION


def _suite_rows(root: BoundSuite) -> List[Dict]:
    rows = []
    for report in root.reports():
        rows.append({
            "suite": report.parent.name if report.parent is not None else "",
            "bound": report.name,
            "kind": report.kind,
            "value": report.bound_value,
            "observed": "" if report.observed_value is None else report.observed_value,
            "slack": "" if report.slack is None else report.slack,
            "status": "OK" if report.satisfied else "VIOLATED",
        })
    return rows


def cmd_bounds(args, config: RunConfig, out: IO[str]) -> int:
    n_values = parse_int_list(args.n)
    a_values = parse_range(args.a)
    ladder = VortexLadder(config.trap, config.radial, n_top=max(n_values) + 1)
    root = BoundSuite("bounds")
    for a in a_values:
        for n in n_values:
            profile = ladder.get(n, a).with_omega(args.omega)
            constants_suite(n, a, args.omega, parent=root)
            profile_bound_suite(profile, parent=root)
        table = critical_table(a, max(n_values), config.trap, ladder, config.jobs)
        suite = BoundSuite(f"critical a={a:g}", parent=root)
        for entry in table.entries:
            BoundReport(f"Omega_{entry.n} upper", entry.upper, entry.omega, parent=suite)
            BoundReport(f"Omega_{entry.n} lower", entry.lower, entry.omega, kind="lower",
                        parent=suite)
        for entry, following in zip(table.entries, table.entries[1:]):
            n = entry.n
            BoundReport(f"Omega_{n + 1} <= (2n+3)/(2n+1) Omega_{n}",
                        (2 * n + 3) / (2 * n + 1) * entry.omega, following.omega, parent=suite)
    if config.format == "text":
        out.write(render_suite(root) + "\n")
    else:
        columns = ["suite", "bound", "kind", "value", "observed", "slack", "status"]
        write_rows(_suite_rows(root), columns, config.format, out, "bound")
    return 0 if root.satisfied else EXIT_VIOLATION


def _add_point(parser, n: bool = True):
    if n:
        parser.add_argument("--n", type=float, required=True, help="winding number of the vortex")
    parser.add_argument("--a", type=float, default=0.0, help="coupling constant (default: 0)")
    parser.add_argument("--omega", type=float, default=0.0, help="angular velocity (default: 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gprotor", description="Vortices and symmetry breaking in rotating condensates"
    )
    parser.add_argument("--config", help="XML configuration file; its values win over flags")
    parser.add_argument("--trap", default="harmonic",
                        help="'harmonic', 'homogeneous:<exponent>' or a file with r, V columns")
    parser.add_argument("--step", type=float, help="radial grid spacing")
    parser.add_argument("--points", type=int, help="2D grid points per side")
    parser.add_argument("--extent", type=float, help="2D grid half width (default: automatic)")
    parser.add_argument("--restarts", type=int, help="2D minimizer restarts")
    parser.add_argument("--seed", type=int, help="seed of the 2D restarts")
    parser.add_argument("--jobs", type=int, help="worker threads (default: $GPROTOR_THREADS or 1)")
    parser.add_argument("--format", choices=FORMATS, help="output format (default: csv)")
    parser.add_argument("--strict", action="store_true",
                        help="fail when a 2D minimization does not converge")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("-q", "--quiet", action="store_true")
    commands = parser.add_subparsers(dest="command", required=True)

    vortex = commands.add_parser("vortex", help="minimize the n-vortex functional")
    _add_point(vortex)
    vortex.add_argument("--check-bounds", action="store_true", help="evaluate the bound suite")
    vortex.add_argument("--output", help="write the profile to this file")
    vortex.set_defaults(handler=cmd_vortex)

    critical = commands.add_parser("critical", help="table of critical frequencies")
    critical.add_argument("--a", default="0,1,10,100", help="couplings (list, lin: or log:)")
    critical.add_argument("--n-max", type=int, default=4)
    critical.set_defaults(handler=cmd_critical)

    stability = commands.add_parser("stability", help="stability analysis of an n-vortex")
    _add_point(stability)
    stability.set_defaults(handler=cmd_stability)

    breaking = commands.add_parser("breaking", help="symmetry breaking diagnosis or sweep")
    breaking.add_argument("--a", required=True, help="couplings (list, lin: or log:)")
    breaking.add_argument("--omega", required=True, help="angular velocities")
    breaking.add_argument("--n-max", type=int, default=6, help="highest vortex compared")
    breaking.add_argument("--no-dm", action="store_true", help="skip the density matrix solve")
    breaking.add_argument("--field-dir", help="write the 2D fields into this directory")
    breaking.set_defaults(handler=cmd_breaking)

    dm = commands.add_parser("dm", help="minimize the density matrix functional")
    _add_point(dm, n=False)
    dm.add_argument("--jmax", type=int, help="highest angular momentum sector")
    dm.add_argument("--initial", help="starting occupations, e.g. '0=0.5,1=0.5'")
    dm.add_argument("--output", help="write occupations and orbitals to this file")
    dm.set_defaults(handler=cmd_dm)

    multi = commands.add_parser("multi", help="multi-component energies and their ordering")
    _add_point(multi, n=False)
    multi.add_argument("--components", help="component counts, e.g. '1-3'")
    multi.add_argument("--tolerance", type=float, default=1e-5)
    multi.set_defaults(handler=cmd_multi)

    bounds = commands.add_parser("bounds", help="verify the analytic bounds")
    bounds.add_argument("--n", default="0-4", help="winding numbers, e.g. '0-4'")
    bounds.add_argument("--a", default="1,10,100", help="couplings")
    bounds.add_argument("--omega", type=float, default=0.0)
    bounds.set_defaults(handler=cmd_bounds)
    return parser


def build_config(args) -> RunConfig:
    """Defaults, then flags, then the configuration file."""
    config = RunConfig(trap=TrapPotential.from_spec(args.trap))
    if args.step is not None:
        config = replace(config, radial=replace(config.radial, step=args.step))
    solver2d = config.solver2d
    if args.restarts is not None:
        solver2d = replace(solver2d, restarts=args.restarts)
    if args.seed is not None:
        solver2d = replace(solver2d, seed=args.seed)
    if args.strict:
        solver2d = replace(solver2d, strict=True)
    config = replace(config, solver2d=solver2d)
    if args.points is not None:
        config = replace(config, grid_points=args.points)
    if args.extent is not None:
        config = replace(config, grid_extent=args.extent)
    if getattr(args, "jmax", None) is not None:
        config = replace(config, dm=replace(config.dm, j_max=args.jmax))
    config = replace(
        config,
        jobs=args.jobs if args.jobs is not None else jobs_from_environment(),
        format=args.format or config.format,
    )
    if args.config:
        config = load_config(args.config, config)
    return config.with_jobs()


def _configure_logging(args):
    if args.quiet:
        level = logging.ERROR
    elif args.verbose >= 2:
        level = logging.DEBUG
    elif args.verbose == 1:
        level = logging.INFO
    else:
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def main(argv: Sequence[str] | None = None, out: IO[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args)
    out = out or sys.stdout
    try:
        config = build_config(args)
        return args.handler(args, config, out)
    except ConvergenceError as error:
        log.error("%s", error)
        return EXIT_CONVERGENCE
    except (ValueError, FileNotFoundError) as error:
        print(f"gprotor: error: {error}", file=sys.stderr)
        return EXIT_USAGE
