from pathlib import Path

import click

from commands.common import echo_json, handle_errors
from models.path import path_from_json
from utils.collision import (
    DEFAULT_WINDOW,
    analyze_event,
    detect_collisions,
    has_repeated_sections,
    section_orders,
    write_gap_csv,
)


@click.command("analyze")
@click.option("--path", "path_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--window", type=int, default=DEFAULT_WINDOW, show_default=True, help="Nodes per exponent fit.")
@click.option("--out", type=click.Path(file_okay=False), help="Directory for gaps.csv.")
@handle_errors
def analyze(path_file, window, out):
    """Detect collisions on a stored path and fit their asymptotics."""
    p = path_from_json(Path(path_file).read_text())
    events = [
        analyze_event(p, e, window=window)
        for e in detect_collisions(p)
        if p.T1 < e.t0 < p.T2
    ]
    orders = section_orders(p, events)
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        write_gap_csv(p, Path(out) / "gaps.csv")
    echo_json(
        {
            "collision_count": len(events),
            "events": [e.to_dict() for e in events],
            "sections": [str(o) for o in orders],
            "repeated_sections": has_repeated_sections(orders),
        }
    )
