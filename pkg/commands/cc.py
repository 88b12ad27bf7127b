import click

from commands.common import build_params, echo_json, floats, handle_errors, ints, system_options
from models.central_configuration import CentralConfiguration
from models.configuration import OrderLabel
from utils.central_config import (
    certify_nondegenerate,
    enumerate_ccs,
    lambda_of,
    scaled_cc_residual,
    solve_cc,
    write_cc_csv,
)


@click.group("cc")
def cc_group():
    """Collinear central configurations."""


@cc_group.command("solve")
@system_options
@click.option("--order", help="1-based body order from left to right, e.g. 2,1,3.")
@click.option("--lambda", "lam", type=float, help="Target lambda (default 2a/(2+a)^2).")
@handle_errors
def solve(masses, alpha, tol_collision, order, lam):
    params = build_params(masses, alpha, tol_collision)
    label = OrderLabel(ints(order)) if order else None
    echo_json(solve_cc(params, label, lam).to_dict())


@cc_group.command("enum")
@system_options
@click.option("--lambda", "lam", type=float)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), help="CSV file, one row per ordering.")
@handle_errors
def enum(masses, alpha, tol_collision, lam, workers, out):
    """Solve every ordering of the bodies."""
    params = build_params(masses, alpha, tol_collision)
    ccs = [certify_nondegenerate(cc) for cc in enumerate_ccs(params, lam, workers)]
    if out:
        write_cc_csv(ccs, out)
    echo_json([cc.to_dict() for cc in ccs])


@cc_group.command("certify")
@system_options
@click.option("--positions", help="Candidate positions; solved from --order when omitted.")
@click.option("--order")
@click.option("--lambda", "lam", type=float)
@handle_errors
def certify(masses, alpha, tol_collision, positions, order, lam):
    """Check that a configuration is central and non-degenerate."""
    params = build_params(masses, alpha, tol_collision)
    if positions:
        q = floats(positions)
        lam = lambda_of(q, params) if lam is None else lam
        label = OrderLabel.from_indices(sorted(range(len(q)), key=q.__getitem__))
        cc = CentralConfiguration(
            positions=q, lam=lam, order=label, params=params,
            residual=scaled_cc_residual(q, params, lam),
        )
    else:
        cc = solve_cc(params, OrderLabel(ints(order)) if order else None, lam)
    echo_json(certify_nondegenerate(cc).to_dict())
