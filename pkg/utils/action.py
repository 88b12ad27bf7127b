"""Force function, Lagrangian and discretized action of the collinear N-body problem.

Paths are piecewise linear between nodes. The kinetic term is exact on each
interval, the force function is integrated with the trapezoidal rule and each
interval where two bodies come within 10 x collision_tol (or cross) is
sub-sampled `quadrature_refinement` times.

Per-body and per-pair contributions are summed after sorting, so a value never
depends on how the bodies are labelled.
"""

import numpy as np

from utils.errors import CollisionSingularity, ValidationError


def _pairs(n_bodies):
    return np.triu_indices(n_bodies, 1)


def _sorted_sum(terms):
    return np.sort(terms, axis=-1).sum(axis=-1)


def pair_potential(diffs, pair_masses, params, eps):
    """coupling * m_k m_j / |d|^alpha, or the eps-smoothed form when eps > 0."""
    diffs = np.asarray(diffs, dtype=float)
    if eps > 0:
        return params.coupling * pair_masses * (diffs**2 + eps**2) ** (-params.alpha / 2)
    distance = np.abs(diffs)
    if np.any(distance == 0):
        raise CollisionSingularity("two bodies occupy the same position")
    return params.coupling * pair_masses * distance ** (-params.alpha)


def potential_values(positions, params, eps=0.0):
    """Force function U for every configuration row of `positions` (..., N)."""
    positions = np.asarray(positions, dtype=float)
    left, right = _pairs(params.n_bodies)
    masses = params.mass_array
    diffs = positions[..., right] - positions[..., left]
    return _sorted_sum(pair_potential(diffs, masses[left] * masses[right], params, eps))


def potential(c):
    return float(potential_values(c.positions, c.params))


def regularized_potential(c, eps):
    if not eps > 0:
        raise ValidationError("eps must be positive")
    return float(potential_values(c.positions, c.params, eps))


def force(positions, params, eps=0.0):
    """dU/dq for every configuration row of `positions` (..., N)."""
    positions = np.asarray(positions, dtype=float)
    masses = params.mass_array
    n = params.n_bodies
    # diffs[..., k, j] = q_j - q_k
    diffs = positions[..., None, :] - positions[..., :, None]
    squared = diffs**2 + eps**2
    off_diagonal = ~np.eye(n, dtype=bool)
    if eps == 0 and np.any(squared[..., off_diagonal] == 0):
        raise CollisionSingularity("two bodies occupy the same position")
    squared[..., ~off_diagonal] = 1.0
    weights = masses[None, :] * diffs * squared ** (-(params.alpha + 2) / 2)
    return params.alpha * params.coupling * masses * weights.sum(axis=-1)


def kinetic(velocities, params):
    velocities = np.asarray(velocities, dtype=float)
    return float(_sorted_sum(0.5 * params.mass_array * velocities**2))


def moment_of_inertia(c):
    return float(np.sum(c.params.mass_array * c.positions**2))


def energy(positions, velocities, params):
    """Total energy E = K - U."""
    return kinetic(velocities, params) - float(potential_values(positions, params))


def refined_intervals(pair_diffs, params):
    """Intervals whose quadrature is sub-sampled: a pair within 10 x collision_tol, or crossing."""
    floor = 10 * params.collision_tol
    small = np.abs(pair_diffs) < floor
    near = np.any(small[:-1] | small[1:], axis=1)
    crossing = np.any(pair_diffs[:-1] * pair_diffs[1:] < 0, axis=1)
    return near | crossing


def _quadrature(times, values, refined, refinement):
    """Trapezoid weights on plain nodes plus sub-samples of the refined intervals."""
    h = np.diff(times)
    plain = np.nonzero(~refined)[0]
    node_weights = np.zeros(times.size)
    np.add.at(node_weights, plain, h[plain] / 2)
    np.add.at(node_weights, plain + 1, h[plain] / 2)

    index = np.nonzero(refined)[0]
    theta = np.arange(refinement + 1) / refinement
    trapezoid = np.ones(refinement + 1)
    trapezoid[[0, -1]] = 0.5
    weights = (h[index] / refinement)[:, None] * trapezoid[None, :]
    samples = (1 - theta)[None, :, None] * values[index][:, None, :] + theta[
        None, :, None
    ] * values[index + 1][:, None, :]
    return node_weights, index, theta, weights, samples


def evaluate_action(times, positions, params, eps=0.0, with_gradient=False):
    """Discrete action of a nodal path; optionally the raw gradient w.r.t. every node."""
    times = np.asarray(times, dtype=float)
    positions = np.asarray(positions, dtype=float)
    masses = params.mass_array
    left, right = _pairs(params.n_bodies)

    pair_diffs = positions[:, right] - positions[:, left]
    refined = refined_intervals(pair_diffs, params)
    node_weights, index, theta, weights, samples = _quadrature(
        times, positions, refined, params.quadrature_refinement
    )

    potential_part = np.sum(node_weights * potential_values(positions, params, eps))
    if index.size:
        potential_part += np.sum(weights * potential_values(samples, params, eps))

    h = np.diff(times)
    steps = np.diff(positions, axis=0)
    kinetic_part = np.sum(_sorted_sum(0.5 * masses * steps**2) / h)
    value = float(kinetic_part + potential_part)
    if not with_gradient:
        return value

    momentum = masses * steps / h[:, None]
    gradient = np.zeros_like(positions)
    gradient[:-1] -= momentum
    gradient[1:] += momentum
    gradient += node_weights[:, None] * force(positions, params, eps)
    if index.size:
        sample_force = force(samples, params, eps)
        np.add.at(gradient, index, np.sum((weights * (1 - theta))[..., None] * sample_force, axis=1))
        np.add.at(gradient, index + 1, np.sum((weights * theta)[..., None] * sample_force, axis=1))
    return value, gradient


def action(p, eps=0.0):
    return evaluate_action(p.times, p.positions, p.params, eps)


def project_center_of_mass(vectors, masses):
    """Remove the component along the mass vector (Euclidean projection)."""
    vectors = np.asarray(vectors, dtype=float)
    return vectors - np.outer(vectors @ masses, masses) / np.dot(masses, masses)


def action_gradient(p, eps):
    """Gradient of the eps-regularized action w.r.t. interior nodes, projected on sum m*q = 0.

    Each node row is orthogonal to the mass vector. Only for equal masses is
    that the same as a zero component along a uniform translation.
    """
    if not eps > 0:
        raise ValidationError("the action gradient is only defined for eps > 0")
    _, gradient = evaluate_action(p.times, p.positions, p.params, eps, with_gradient=True)
    return project_center_of_mass(gradient[1:-1], p.params.mass_array)


def gap_action(g, eps=0.0):
    """Action evaluated in gap variables through the Lagrangian identity.

    Every pair l < r (in the gap path's order) contributes
    m_l m_r / (2M) * |sum_{l<=j<r} dx_j/dt|^2 plus its force-function term in
    |sum_{l<=j<r} x_j|.
    """
    params = g.params
    masses = g.ordered_masses
    left, right = _pairs(params.n_bodies)
    pair_masses = masses[left] * masses[right]

    partial = np.concatenate([np.zeros((g.times.size, 1)), np.cumsum(g.gaps, axis=1)], axis=1)
    spans = partial[:, right] - partial[:, left]

    refined = refined_intervals(spans, params)
    node_weights, index, _, weights, samples = _quadrature(
        g.times, spans, refined, params.quadrature_refinement
    )
    node_potential = _sorted_sum(pair_potential(spans, pair_masses, params, eps))
    potential_part = np.sum(node_weights * node_potential)
    if index.size:
        potential_part += np.sum(
            weights * _sorted_sum(pair_potential(samples, pair_masses, params, eps))
        )

    h = np.diff(g.times)
    span_steps = np.diff(spans, axis=0)
    kinetic_part = np.sum(
        _sorted_sum(pair_masses / (2 * params.total_mass) * span_steps**2) / h
    )
    return float(kinetic_part + potential_part)
