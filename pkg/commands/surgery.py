from pathlib import Path

import click

from commands.common import echo_json, handle_errors
from models.configuration import order_of
from models.path import path_from_json, path_to_json, to_gaps
from utils.surgery import check_inequality_32, normalize_order, plateau_deform


@click.group("surgery")
def surgery_group():
    """Equal-mass path operations."""


@surgery_group.command("normalize")
@click.option("--path", "path_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), help="Write the relabeled path here.")
@handle_errors
def normalize(path_file, out):
    """Relabel each collision-free section so the order never changes."""
    p = path_from_json(Path(path_file).read_text())
    h = normalize_order(p)
    if out:
        Path(out).write_text(path_to_json(h) + "\n")
    echo_json({"order": str(order_of(h.node(0))), "grid_size": h.grid_size})


@surgery_group.command("plateau")
@click.option("--path", "path_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--gap", "gap_index", type=int, required=True, help="0-based gap index.")
@click.option("--t0", type=float, required=True, help="Collision moment.")
@click.option("--delta", type=float, help="Plateau height (default 5 x collision_tol).")
@click.option("--normalize/--no-normalize", default=True, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), help="Write the deformed path here.")
@handle_errors
def plateau(path_file, gap_index, t0, delta, normalize, out):
    """Flatten a dip of one gap below delta and compare the actions."""
    p = path_from_json(Path(path_file).read_text())
    if normalize:
        p = normalize_order(p)
    outcome = plateau_deform(to_gaps(p, order_of(p.node(0))), gap_index, t0, delta)
    if out:
        Path(out).write_text(path_to_json(outcome.path) + "\n")
    echo_json(outcome.to_dict())


@surgery_group.command("inequality")
@click.option("--path", "path_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--gap", "gap_index", type=int, required=True)
@click.option("--first", type=int, required=True, help="First node of the window.")
@click.option("--last", type=int, required=True, help="Last node of the window.")
@handle_errors
def inequality(path_file, gap_index, first, last):
    """Evaluate A v^2 + B v > 0 on a node window."""
    p = path_from_json(Path(path_file).read_text())
    holds, margin = check_inequality_32(to_gaps(p, order_of(p.node(0))), gap_index, (first, last))
    echo_json({"holds": holds, "margin": margin})
