import sys

import click

from commands.common import apply_overrides, default_out, floats, handle_errors, spec_options
from extensions import log
from utils.harness import (
    collision_matrix,
    collision_summary,
    emit_report,
    emit_sweep,
    format_report,
    load_spec,
    mass_sweep_specs,
    order_pair_specs,
    run_experiment,
    sweep,
)

logger = log.getChild("commands")


@click.group("experiment")
def experiment_group():
    """Run the collision experiments and write their reports."""


@experiment_group.command("run")
@spec_options
@handle_errors
def run(spec_file, **overrides):
    """Run one experiment; the exit code is 0 passed, 1 failed, 2 not converged or error."""
    spec = apply_overrides(load_spec(spec_file), **overrides)
    report = run_experiment(spec)
    emit_report(report, default_out(spec.output_dir))
    click.echo(format_report(report), nl=False)
    sys.exit(report.exit_code)


@experiment_group.command("sweep")
@click.option("--spec", "spec_files", multiple=True, type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--orders",
    "orders_file",
    type=click.Path(exists=True, dir_okay=False),
    help="Base spec expanded to every pair of endpoint orders.",
)
@click.option(
    "--masses",
    "mass_sets",
    multiple=True,
    help="Mass vector for the --orders expansion, e.g. 1,2,3; repeat for several.",
)
@click.option("--parallelism", type=int, default=1, show_default=True)
@click.option("--out", type=click.Path(file_okay=False))
@handle_errors
def sweep_cmd(spec_files, orders_file, mass_sets, parallelism, out):
    """Run many experiments; exit code is the worst of theirs."""
    out = default_out(out)
    specs = [apply_overrides(load_spec(f), out=f"{out}/{i:03d}") for i, f in enumerate(spec_files)]
    if orders_file:
        base = apply_overrides(load_spec(orders_file), out=f"{out}/orders")
        if mass_sets:
            specs.extend(mass_sweep_specs(base, [floats(m) for m in mass_sets]))
        else:
            specs.extend(order_pair_specs(base))
    reports = sweep(specs, parallelism)
    emit_sweep(reports, out)

    labels, matrix = collision_matrix(reports)
    for report in reports:
        click.echo(f"{report.name}: {report.status} collisions={report.collision_count}")
    if labels and len(mass_sets) <= 1:
        click.echo("collision matrix (rows: initial order, columns: final order)")
        for label, row in zip(labels, matrix):
            click.echo(f"  {label} " + " ".join("-" if c is None else str(c) for c in row))
    for masses, stats in collision_summary(reports)["by_masses"].items():
        click.echo(
            f"masses {masses or '-'}: different-order runs {stats['different_order_runs']}, "
            f"max collisions {stats['max_collisions']}, histogram {stats['histogram']}"
        )
    worst = max((r.exit_code for r in reports), default=0)
    logger.info("sweep of %d experiments finished with exit code %d", len(reports), worst)
    sys.exit(worst)
