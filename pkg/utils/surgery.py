"""Path operations behind the equal-mass arguments.

`relabel` permutes body labels, `normalize_order` relabels each collision-free
section so the order never changes, and `plateau_deform` flattens a dip of
one gap below delta into the constant delta.
"""

import warnings

import numpy as np

from extensions import log
from models.configuration import OrderLabel
from models.path import DiscretePath, to_path
from models.surgery_outcome import SurgeryOutcome
from utils.action import gap_action
from utils.collision import detect_collisions, section_orders
from utils.errors import (
    CollisionSingularity,
    ContinuityFailure,
    UnequalMassWarning,
    ValidationError,
    WindowNotFound,
)

logger = log.getChild("surgery")

DELTA_FACTOR = 5


def _as_label(tau, n_bodies):
    label = tau if isinstance(tau, OrderLabel) else OrderLabel(tuple(tau))
    if len(label) != n_bodies:
        raise ValidationError("permutation length does not match the number of bodies")
    return label


def _recenter(positions, params):
    if params.equal_masses:
        return positions
    warnings.warn(
        "relabeling bodies of unequal masses changes the action", UnequalMassWarning, stacklevel=3
    )
    masses = params.mass_array
    return positions - (positions @ masses / masses.sum())[:, None]


def relabel(p, tau):
    """Path r with r_i(t) = q_tau(i)(t); tau is a 1-based permutation."""
    label = _as_label(tau, p.params.n_bodies)
    positions = p.positions[:, label.indices]
    return DiscretePath(p.times, _recenter(positions, p.params), p.params)


def normalize_order(p, events=None):
    """Relabel every collision-free section onto the order of the first one.

    Section k uses the permutation tau_k with tau_k(R[r]) = o_k[r], where R is
    the reference order and o_k the order of the section, so the relabeled path
    keeps R throughout. At every collision moment the two labelings must agree
    on the limit positions; a disagreement larger than one grid step of motion
    plus collision_tol means the event was misplaced.
    """
    params = p.params
    events = detect_collisions(p) if events is None else events
    moments = sorted(e.t0 for e in events if p.T1 < e.t0 < p.T2)
    orders = section_orders(p, events)
    reference = orders[0].indices

    permutations = []
    for order in orders:
        tau = np.empty(params.n_bodies, dtype=int)
        tau[reference] = order.indices
        permutations.append(tau)

    section = np.searchsorted(moments, p.times, side="left")
    positions = np.empty_like(p.positions)
    for i, k in enumerate(section):
        positions[i] = p.positions[i, permutations[k]]

    for k, t0 in enumerate(moments):
        limit = p.at(t0)
        defect = float(np.max(np.abs(limit[permutations[k]] - limit[permutations[k + 1]])))
        node = int(np.searchsorted(p.times, t0))
        step = float(np.max(np.abs(p.positions[node] - p.positions[node - 1])))
        if defect > step + params.collision_tol:
            raise ContinuityFailure(
                f"relabeled limits disagree by {defect:.3e} at t0={t0:.6g} "
                f"(allowed {step + params.collision_tol:.3e})"
            )
        logger.debug("section %d -> %d at t0=%.6g: limit defect %.3e", k, k + 1, t0, defect)

    return DiscretePath(p.times, _recenter(positions, params), params)


def _crossing_time(times, x, inside, outside, delta):
    """Time where the linear interpolant of x between two nodes equals delta."""
    fraction = (delta - x[outside]) / (x[inside] - x[outside])
    return times[outside] + fraction * (times[inside] - times[outside])


def _insert_node(times, gaps, t):
    """Grid and gap rows with a node at t (no-op if t already is a node)."""
    if np.any(times == t):
        return times, gaps
    row = np.array([np.interp(t, times, gaps[:, j]) for j in range(gaps.shape[1])])
    at = int(np.searchsorted(times, t))
    return np.insert(times, at, t), np.insert(gaps, at, row, axis=0)


def _locate_window(times, x, t0, delta):
    i0 = int(np.argmin(np.abs(times - t0)))
    if x[i0] > delta:
        raise WindowNotFound(f"gap is {x[i0]:.3e} > delta={delta:.3e} near t0={t0:.6g}")
    left = i0
    while left >= 0 and x[left] <= delta:
        left -= 1
    right = i0
    while right < x.size and x[right] <= delta:
        right += 1
    if left < 0 or right >= x.size:
        side = "left" if left < 0 else "right"
        raise WindowNotFound(f"gap never returns above delta={delta:.3e} on the {side} of t0")
    return (
        _crossing_time(times, x, left + 1, left, delta),
        _crossing_time(times, x, right - 1, right, delta),
    )


def _gap_action_or_inf(g):
    try:
        return gap_action(g)
    except CollisionSingularity:
        logger.info("original gap path hits a collision node; its action is infinite")
        return float("inf")


def plateau_deform(g, gap_index, t0, delta=None):
    """Replace gap `gap_index` by the constant delta on the window where it dips below delta.

    The window ends are the exact level crossings of the piecewise-linear gap,
    inserted as new nodes so the path outside the window is unchanged. Both
    actions are evaluated on the refined grid at eps = 0.
    """
    params = g.params
    k = int(gap_index)
    if not 0 <= k < params.n_bodies - 1:
        raise ValidationError(f"gap_index must lie in [0, {params.n_bodies - 2}]")
    delta = DELTA_FACTOR * params.collision_tol if delta is None else float(delta)
    if not delta > 0:
        raise ValidationError("delta must be positive")

    t_left, t_right = _locate_window(g.times, g.gaps[:, k], t0, delta)
    times, gaps = _insert_node(g.times, g.gaps, t_left)
    times, gaps = _insert_node(times, gaps, t_right)
    before = g.with_gaps(gaps, times)

    window = (times >= t_left) & (times <= t_right)
    flattened = gaps.copy()
    flattened[window, k] = delta
    after = g.with_gaps(flattened, times)

    first, last = np.nonzero(window)[0][[0, -1]]
    holds, margin = check_inequality_32(before, k, (first, last))
    others = np.delete(flattened[window], k, axis=1)

    action_before = _gap_action_or_inf(before)
    action_after = gap_action(after)
    detail = {
        "gap_index": k,
        "delta": delta,
        "t0": float(t0),
        "window": [float(t_left), float(t_right)],
        "nodes_inserted": int(times.size - g.times.size),
        "inequality_holds": holds,
        "inequality_margin": margin,
        "other_gaps_clear": bool(others.size == 0 or np.all(others > delta)),
        "margin": action_before - action_after,
    }
    logger.info(
        "plateau on gap %d over [%.6g, %.6g]: action %.10g -> %.10g",
        k, t_left, t_right, action_before, action_after,
    )
    return SurgeryOutcome(
        path=to_path(after),
        action_before=action_before,
        action_after=action_after,
        applied=True,
        detail=detail,
    )


def inequality_coefficients(masses, gap_index, velocities):
    """A and B of A*v_k^2 + B*v_k at every row of gap velocities.

    Every pair l <= k < r of ordered bodies spans gap k and contributes
    m_l m_r / (2M) to A and (m_l m_r / M) * sum of the other spanned gap
    velocities to B.
    """
    total = masses.sum()
    velocities = np.atleast_2d(velocities)
    a = 0.0
    b = np.zeros(velocities.shape[0])
    for left in range(gap_index + 1):
        for right in range(gap_index + 1, masses.size):
            weight = masses[left] * masses[right] / total
            a += weight / 2
            spanned = velocities[:, left:right].sum(axis=1) - velocities[:, gap_index]
            b += weight * spanned
    return a, b


def check_inequality_32(g, gap_index, window):
    """Whether A*v^2 + B*v > 0 holds at every node of `window` (inclusive node indices).

    Gap velocities come from second-order finite differences on the grid.
    Returns the verdict and the smallest margin.
    """
    first, last = (int(i) for i in window)
    if not 0 <= first <= last < g.times.size:
        raise ValidationError(f"window {window} is outside the grid")
    velocities = np.gradient(g.gaps, g.times, axis=0)[first : last + 1]
    a, b = inequality_coefficients(g.ordered_masses, gap_index, velocities)
    v = velocities[:, gap_index]
    margins = a * v**2 + b * v
    margin = float(np.min(margins))
    return bool(margin > 0), margin

