import click

from commands.common import build_params, echo_json, floats, handle_errors, system_options
from models.trajectory_state import TrajectoryState
from utils.dynamics import energy_drift, integrate, write_trajectory_csv
from utils.errors import CollisionApproach


@click.command("integrate")
@system_options
@click.option("--positions", required=True, help="Initial positions, center of mass at 0.")
@click.option("--velocities", required=True, help="Initial velocities, zero total momentum.")
@click.option("--t-end", type=float, required=True)
@click.option("--rtol", type=float, default=1e-10, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), help="Trajectory CSV (t, q, v, E).")
@handle_errors
def integrate_cmd(masses, alpha, tol_collision, positions, velocities, t_end, rtol, out):
    """Integrate Newton's equations until t_end or the first near-collision."""
    params = build_params(masses, alpha, tol_collision)
    state0 = TrajectoryState(0.0, floats(positions), floats(velocities), params)
    halted = None
    try:
        states = integrate(state0, t_end, params, rtol=rtol)
    except CollisionApproach as e:
        states, halted = e.states, str(e)
    if out:
        write_trajectory_csv(states, out)
    echo_json(
        {
            "final": states[-1].to_dict(),
            "steps": len(states),
            "energy_drift": energy_drift(states),
            "halted": halted,
        }
    )
