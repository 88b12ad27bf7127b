"""Newton's equations m_j q_j'' = dU/dq_j as an independent check on minimizers.

Integration uses scipy's DOP853 and stops at the first moment two bodies come
within collision_tol; what happens after a collision is not its concern.
"""

import numpy as np
from scipy.integrate import solve_ivp

from extensions import log
from models.path import DiscretePath
from models.trajectory_state import TrajectoryState
from utils.action import force
from utils.errors import BolzaError, CollisionApproach, SegmentContainsCollision, ValidationError

logger = log.getChild("dynamics")

ENERGY_DRIFT_TOL = 1e-7
FLOOR_FACTOR = 10


def _min_gap(positions):
    return np.min(np.diff(np.sort(positions)))


def integrate(state0, t_end, params=None, rtol=1e-10, atol=1e-12, t_eval=None):
    """Trajectory from state0 to t_end (forward or backward in time).

    Returns the states at `t_eval` when given, otherwise at every accepted
    step. Raises CollisionApproach, carrying the states reached so far, if two
    bodies come within collision_tol.
    """
    params = params or state0.params
    n = params.n_bodies
    masses = params.mass_array
    if _min_gap(state0.positions) <= params.collision_tol:
        raise CollisionApproach("initial state is already at a collision", [state0])
    if t_end == state0.time:
        return [state0]

    def rhs(_, y):
        return np.concatenate([y[n:], force(y[:n], params) / masses])

    def approach(_, y):
        return _min_gap(y[:n]) - params.collision_tol

    approach.terminal = True
    approach.direction = -1

    solution = solve_ivp(
        rhs,
        (state0.time, t_end),
        np.concatenate([state0.positions, state0.velocities]),
        method="DOP853",
        rtol=rtol,
        atol=atol,
        t_eval=t_eval,
        events=approach,
    )
    states = [
        TrajectoryState(t, y[:n], y[n:], params) for t, y in zip(solution.t, solution.y.T)
    ]
    if solution.status == 1:
        t_hit = float(solution.t_events[0][0])
        y_hit = solution.y_events[0][0]
        states.append(TrajectoryState(t_hit, y_hit[:n], y_hit[n:], params))
        raise CollisionApproach(f"bodies within collision_tol at t={t_hit:.10g}", states)
    if solution.status != 0:
        raise BolzaError(f"integration failed: {solution.message}")

    e0 = state0.energy
    drift = max(abs(s.energy - e0) for s in states) if states else 0.0
    if drift > ENERGY_DRIFT_TOL * (abs(e0) + 1):
        logger.warning("energy drift %.3e exceeds %.1e relative", drift, ENERGY_DRIFT_TOL)
    logger.debug("integrated to t=%.6g in %d steps, energy drift %.3e", t_end, solution.t.size, drift)
    return states


def energy_drift(states):
    e0 = states[0].energy
    return max(abs(s.energy - e0) for s in states)


def sample_path(states, params=None):
    """DiscretePath through the positions of a trajectory."""
    params = params or states[0].params
    return DiscretePath(
        np.array([s.time for s in states]), np.array([s.positions for s in states]), params
    )


def eom_residual(p, segment, params=None):
    """Largest relative defect of m * (second difference) against the force on a segment.

    `segment` is an inclusive node range (first, last); the defect is taken at
    its interior nodes and scaled by the largest force component at each node.
    """
    params = params or p.params
    first, last = (int(i) for i in segment)
    if not (0 <= first and last < p.times.size and last - first >= 2):
        raise ValidationError(f"segment {segment} needs at least three nodes inside the grid")

    positions = p.positions[first : last + 1]
    times = p.times[first : last + 1]
    gaps = np.diff(np.sort(positions, axis=1), axis=1)
    floor = FLOOR_FACTOR * params.collision_tol
    if np.any(gaps <= floor):
        raise SegmentContainsCollision(
            f"segment [{times[0]:.6g}, {times[-1]:.6g}] has bodies within {floor:.1e}"
        )

    h = np.diff(times)[:, None]
    slopes = np.diff(positions, axis=0) / h
    acceleration = 2 * np.diff(slopes, axis=0) / (h[:-1] + h[1:])
    inner = positions[1:-1]
    f = force(inner, params)
    defect = np.max(np.abs(params.mass_array * acceleration - f), axis=1)
    return float(np.max(defect / np.max(np.abs(f), axis=1)))


def collision_free_segments(p, min_nodes=3):
    """Maximal inclusive node ranges whose gaps all exceed 10 x collision_tol."""
    gaps = np.diff(np.sort(p.positions, axis=1), axis=1)
    clear = np.all(gaps > FLOOR_FACTOR * p.params.collision_tol, axis=1)
    segments = []
    start = None
    for i, ok in enumerate(clear):
        if ok and start is None:
            start = i
        if not ok and start is not None:
            segments.append((start, i - 1))
            start = None
    if start is not None:
        segments.append((start, clear.size - 1))
    return [s for s in segments if s[1] - s[0] + 1 >= min_nodes]


def node_state(p, node):
    """State at an interior node; the velocity is the central difference."""
    if not 0 < node < p.grid_size:
        raise ValidationError("node must be interior to the grid")
    velocities = (p.positions[node + 1] - p.positions[node - 1]) / (
        p.times[node + 1] - p.times[node - 1]
    )
    return TrajectoryState(p.times[node], p.positions[node], velocities, p.params)


def track_minimizer(p, node, span):
    """Max deviation between the path and the trajectory started from its state at `node`."""
    state = node_state(p, node)
    stop = int(np.searchsorted(p.times, p.times[node] + span, side="right"))
    nodes = np.arange(node, stop)
    states = integrate(state, p.times[nodes[-1]], t_eval=p.times[nodes])
    traced = np.array([s.positions for s in states])
    return float(np.max(np.abs(traced - p.positions[nodes])))


def write_trajectory_csv(states, path):
    n = states[0].params.n_bodies if states else 0
    rows = np.array(
        [np.concatenate([[s.time], s.positions, s.velocities, [s.energy]]) for s in states]
    ).reshape(-1, 2 * n + 2)
    header = ",".join(
        ["t"] + [f"q{j + 1}" for j in range(n)] + [f"v{j + 1}" for j in range(n)] + ["E"]
    )
    np.savetxt(path, rows, delimiter=",", header=header, comments="", fmt="%.17g")
