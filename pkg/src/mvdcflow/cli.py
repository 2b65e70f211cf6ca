"""Command-line interface.

Exit codes: 0 success, 2 input error (unreadable or invalid network, bad
option), 3 numerical failure (non-convergence, voltage collapse).

Every option can also come from an environment variable named
``MVDCFLOW_<OPTION>`` (e.g. ``MVDCFLOW_SOLVER=monotone``) or from a JSON
defaults file given with ``--config``. Precedence is flag, then environment,
then config file, then built-in default.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path
from typing import Any

import click

from .ac_solver import AcConvergenceError, AcOptions, dc_limit_study, solve_ac, solve_newton_raphson
from .contingency import run_study
from .dc_solvers import ConvergenceError, SolveOptions, solve_network
from .netmodel import (
    CONDUCTOR_PAIRS,
    CRUISE,
    TAKEOFF,
    Network,
    NetworkError,
    apply_scenario,
    builtin_architecture1,
    count_breakers,
    load_network,
    total_cable_length,
    with_conductors,
)
from .report import ReportDocument, Table, ac_report, dc_report, render, study_report

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3

BUILTIN = {"arch1": builtin_architecture1}
SCENARIOS = {"takeoff": TAKEOFF, "cruise": CRUISE}


class InputError(click.ClickException):
    exit_code = EXIT_INPUT


class NumericalError(click.ClickException):
    exit_code = EXIT_NUMERIC


def _load(net_arg: str, conductors: str | None, scenario: str | None) -> Network:
    try:
        if net_arg in BUILTIN:
            net = BUILTIN[net_arg](conductors or "helens_pansy")
        else:
            net = load_network(Path(net_arg))
            if conductors:
                net = with_conductors(net, conductors)
        if scenario:
            net = apply_scenario(net, SCENARIOS[scenario])
    except NetworkError as exc:
        raise InputError(str(exc)) from exc
    except KeyError as exc:
        raise InputError(f"unknown conductor pair or scenario: {exc}") from exc
    return net


def _emit(doc: ReportDocument, fmt: str, output: str | None) -> None:
    text = render(doc, fmt)
    if output:
        Path(output).write_text(text)
    else:
        click.echo(text, nl=False)


def _net_options(f):
    opts = [
        click.option("--net", "net_arg", default="arch1", show_default=True, envvar="MVDCFLOW_NET",
                     help="'arch1' for the built-in case, or a network JSON path."),
        click.option("--conductors", type=click.Choice(sorted(CONDUCTOR_PAIRS)), default=None, envvar="MVDCFLOW_CONDUCTORS",
                     help="Cable pair (EEU tier / feeder tier)."),
        click.option("--scenario", type=click.Choice(sorted(SCENARIOS)), default=None, envvar="MVDCFLOW_SCENARIO",
                     help="Scale loads to a flight phase."),
        click.option("--format", "fmt", type=click.Choice(["table", "csv", "json"]), default="table",
                     show_default=True, envvar="MVDCFLOW_FORMAT"),
        click.option("--output", type=click.Path(dir_okay=False, writable=True), default=None, envvar="MVDCFLOW_OUTPUT",
                     help="Write the report here instead of stdout."),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


def _dc_options(f):
    opts = [
        click.option("--solver", type=click.Choice(["zbus", "monotone"]), default="zbus", show_default=True,
                     envvar="MVDCFLOW_SOLVER"),
        click.option("--tol", type=float, default=None, envvar="MVDCFLOW_TOL",
                     help="Voltage step tolerance [V]; default 1e-6 x nominal."),
        click.option("--max-iter", type=click.IntRange(min=1), default=200, show_default=True, envvar="MVDCFLOW_MAX_ITER"),
        click.option("--certificate-interpretation", "cert", type=click.Choice(["yinv", "yinv2"]), default="yinv",
                     show_default=True, envvar="MVDCFLOW_CERTIFICATE_INTERPRETATION"),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


def _solve_options(tol: float | None, max_iter: int, cert: str) -> SolveOptions:
    try:
        return SolveOptions(tolerance=tol, max_iterations=max_iter, certificate_interpretation=cert)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


_CONFIG_KEYS = {"net": "net_arg", "format": "fmt", "certificate-interpretation": "cert", "ac": "use_ac"}


def _param_name(key: str) -> str:
    return _CONFIG_KEYS.get(key, key.replace("-", "_"))


def _load_config(ctx: click.Context, _param: click.Parameter, value: str | None) -> str | None:
    if value:
        try:
            data = json.loads(Path(value).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {value}: {exc}") from exc
        if not isinstance(data, dict):
            raise InputError("config file must hold a JSON object")
        # top-level keys apply to every subcommand; a nested object per command overrides
        shared = {k: v for k, v in data.items() if not isinstance(v, dict)}
        ctx.default_map = {
            cmd: {_param_name(k): v for k, v in {**shared, **data.get(cmd, {})}.items()}
            for cmd in ("solve", "contingency", "ac", "validate", "catalog")
        }
    return value


@click.group(context_settings={"auto_envvar_prefix": "MVDCFLOW", "help_option_names": ["-h", "--help"]})
@click.option("--config", type=click.Path(dir_okay=False), callback=_load_config, is_eager=True, expose_value=False,
              envvar="MVDCFLOW_CONFIG", help="JSON file of option defaults.")
@click.option("--log-level", type=click.Choice(["debug", "info", "warning", "error"]), default="warning",
              envvar="MVDCFLOW_LOG_LEVEL")
def main(log_level: str) -> None:
    """Power flow and contingency studies for bipolar MVDC aircraft networks."""
    logging.basicConfig(level=log_level.upper(), format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


@main.command()
@_net_options
@_dc_options
def solve(net_arg, conductors, scenario, fmt, output, solver, tol, max_iter, cert) -> None:
    """Solve the DC power flow and print bus voltages and branch currents."""
    net = _load(net_arg, conductors, scenario)
    opts = _solve_options(tol, max_iter, cert)
    try:
        sol = solve_network(net, solver, opts)
    except ConvergenceError as exc:
        raise NumericalError(str(exc)) from exc
    except NetworkError as exc:
        raise InputError(str(exc)) from exc
    _emit(dc_report(sol, {"solver": solver, "tol": tol, "max_iter": max_iter, "certificate": cert}), fmt, output)
    if not sol.converged:
        raise NumericalError(f"{solver} did not converge in {max_iter} iterations")


@main.command()
@_net_options
@_dc_options
@click.option("--ac", "use_ac", is_flag=True, help="Run the cases with the AC solver instead.")
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True, envvar="MVDCFLOW_WORKERS")
def contingency(net_arg, conductors, scenario, fmt, output, solver, tol, max_iter, cert, use_ac, workers) -> None:
    """Run the normal case and every single contingency."""
    net = _load(net_arg, conductors, scenario)
    opts = _solve_options(tol, max_iter, cert)
    kind = "ac" if use_ac else solver
    study = run_study(net, kind, opts, workers=workers)
    _emit(study_report(net, study, {"solver": kind, "tol": tol, "max_iter": max_iter, "certificate": cert}), fmt, output)
    if study.normal.status == "diverged":
        raise NumericalError(f"normal case failed: {study.normal.message}")


@main.command()
@_net_options
@click.option("--tol", type=float, default=1e-3, show_default=True, envvar="MVDCFLOW_AC_TOL", help="Mismatch bound [W].")
@click.option("--max-iter", type=click.IntRange(min=1), default=30, show_default=True, envvar="MVDCFLOW_AC_MAX_ITER")
@click.option("--dc-limit", is_flag=True, help="Zero reactance, unity power factor, per-pole powers.")
def ac(net_arg, conductors, scenario, fmt, output, tol, max_iter, dc_limit) -> None:
    """Solve the AC comparison power flow (Newton-Raphson)."""
    net = _load(net_arg, conductors, scenario)
    try:
        opts = AcOptions(tolerance=tol, max_iterations=max_iter)
        sol = solve_newton_raphson(dc_limit_study(net), opts) if dc_limit else solve_ac(net, opts)
    except ValueError as exc:  # includes NetworkError
        raise InputError(str(exc)) from exc
    except AcConvergenceError as exc:
        raise NumericalError(str(exc)) from exc
    _emit(ac_report(net, sol, {"solver": "ac", "tol": tol, "max_iter": max_iter, "dc_limit": dc_limit}), fmt, output)


@main.command()
@click.option("--net", "net_arg", default="arch1", show_default=True, envvar="MVDCFLOW_NET")
@click.option("--conductors", type=click.Choice(sorted(CONDUCTOR_PAIRS)), default=None, envvar="MVDCFLOW_CONDUCTORS")
def validate(net_arg, conductors) -> None:
    """Check a network file and print its structural facts."""
    net = _load(net_arg, conductors, None)
    facts: list[tuple[str, Any]] = [
        ("name", net.name),
        ("buses", len(net.buses)),
        ("branches", len(net.branches)),
        ("breakers", count_breakers(net)),
        ("eeu_tier_length_m", total_cable_length(net, "eeu")),
        ("feeder_tier_length_m", total_cable_length(net, "feeder")),
        ("total_load_w", net.total_load * net.pole_count),
        ("pole_model", net.pole_model),
    ]
    for k, v in facts:
        click.echo(f"{k}: {v}")
    click.echo("ok")


@main.command()
@click.option("--net", "net_arg", default="arch1", show_default=True, envvar="MVDCFLOW_NET")
@click.option("--format", "fmt", type=click.Choice(["table", "csv", "json"]), default="table", envvar="MVDCFLOW_FORMAT")
def catalog(net_arg, fmt) -> None:
    """List the conductor catalog and the named conductor pairs."""
    net = _load(net_arg, None, None)
    reactance = net.ac.reactance_per_meter if net.ac else {}
    rows = tuple(
        (c.name, c.resistance_per_meter * 1000.0, reactance.get(c.name, 0.0) * 1000.0, c.ampacity) for c in net.conductors
    )
    pairs = tuple((name, m["eeu"], m["feeder"]) for name, m in sorted(CONDUCTOR_PAIRS.items()))
    doc = ReportDocument(
        (("network", net.name),),
        (
            Table("conductors", ("name", "r_ohm_per_km", "x_ohm_per_km", "ampacity_a"), rows),
            Table("pairs", ("pair", "eeu_tier", "feeder_tier"), pairs),
        ),
    )
    click.echo(render(doc, fmt), nl=False)


if __name__ == "__main__":  # pragma: no cover
    main()
