import dataclasses
import functools
import json
import os

import click

from models.params import SystemParams
from utils.errors import BolzaError


def handle_errors(command):
    """Report toolkit errors as click errors instead of tracebacks."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except BolzaError as e:
            raise click.ClickException(f"{type(e).__name__}: {e}") from e

    return wrapper


def floats(text):
    """Comma-separated numbers from a command-line value."""
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as e:
        raise click.BadParameter(f"expected comma-separated numbers, got {text!r}") from e


def ints(text):
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError as e:
        raise click.BadParameter(f"expected comma-separated integers, got {text!r}") from e


def system_options(command):
    """--masses / --alpha / --tol-collision for commands that build SystemParams directly."""
    command = click.option("--tol-collision", type=float, default=1e-3, show_default=True)(command)
    command = click.option("--alpha", type=float, default=1.0, show_default=True)(command)
    command = click.option("--masses", required=True, help="Comma-separated masses, e.g. 1,1,1.")(
        command
    )
    return command


def build_params(masses, alpha, tol_collision):
    return SystemParams(masses=floats(masses), alpha=alpha, collision_tol=tol_collision)


def spec_options(command):
    """--spec plus the overrides shared by every experiment-driven command."""
    options = [
        click.option("--tol-eom", type=float, help="EOM residual threshold."),
        click.option("--tol-cc", type=float, help="Limit central configuration residual threshold."),
        click.option("--tol-grad", type=float, help="Minimizer gradient tolerance."),
        click.option("--tol-collision", type=float, help="Collision tolerance."),
        click.option("--alpha", type=float, help="Potential exponent in (0, 2)."),
        click.option("--grid", type=int, help="Number of time steps M."),
        click.option("--seed", type=int, help="Seed of the initial path perturbation."),
        click.option("--out", type=click.Path(file_okay=False), help="Output directory."),
        click.option(
            "--spec", "spec_file", required=True, type=click.Path(exists=True, dir_okay=False)
        ),
    ]
    for option in options:
        command = option(command)
    return command


def apply_overrides(spec, out=None, seed=None, grid=None, alpha=None, tol_collision=None,
                    tol_grad=None, tol_cc=None, tol_eom=None):
    params = spec.params
    if alpha is not None:
        params = dataclasses.replace(params, alpha=alpha)
    if tol_collision is not None:
        params = dataclasses.replace(params, collision_tol=tol_collision)
    minimize_cfg = spec.minimize
    if grid is not None:
        minimize_cfg = dataclasses.replace(minimize_cfg, grid_size=grid)
    if tol_grad is not None:
        minimize_cfg = dataclasses.replace(minimize_cfg, grad_tol=tol_grad)
    tolerances = spec.tolerances
    if tol_cc is not None:
        tolerances = dataclasses.replace(tolerances, cc_residual=tol_cc)
    if tol_eom is not None:
        tolerances = dataclasses.replace(tolerances, eom_residual=tol_eom)
    return dataclasses.replace(
        spec,
        params=params,
        minimize=minimize_cfg,
        tolerances=tolerances,
        seed=spec.seed if seed is None else seed,
        output_dir=out or spec.output_dir,
    )


def default_out(out):
    return out or os.environ.get("BOLZA_OUT", "runs")


def echo_json(data):
    click.echo(json.dumps(data, indent=2))
