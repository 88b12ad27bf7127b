"""Collinear central configurations: dU/dq_k = -lambda * m_k * q_k.

For alpha = 1 this is the classical equation with lambda = U / I; in general
Euler's identity gives lambda = alpha * U / I. Each ordering of the bodies on
the line holds exactly one solution (Moulton), the unique minimizer of the
strictly convex F = U + (lambda / 2) I over the gaps of that ordering.
"""

import csv
import dataclasses
import itertools
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.linalg import null_space

from extensions import log
from models.central_configuration import CentralConfiguration
from models.configuration import Configuration, OrderLabel
from models.path import gap_map
from utils.action import force, moment_of_inertia, potential, potential_values
from utils.errors import NewtonDivergence, NotCentralConfiguration, ValidationError

logger = log.getChild("central_config")

RESIDUAL_TOL = 1e-10
DEGENERACY_TOL = 1e-8
MAX_ENUMERATED_BODIES = 8


def cc_defect(positions, params, lam):
    """Per-body defect dU/dq_k + lambda * m_k * q_k."""
    positions = np.asarray(positions, dtype=float)
    return force(positions, params) + lam * params.mass_array * positions


def cc_residual(positions, params, lam):
    return float(np.linalg.norm(cc_defect(positions, params, lam)))


def scaled_cc_residual(positions, params, lam):
    """Residual relative to the size of the lambda * m * q term."""
    positions = np.asarray(positions, dtype=float)
    scale = lam * float(np.max(np.abs(params.mass_array * positions)))
    return cc_residual(positions, params, lam) / scale


def lambda_of(positions, params):
    """lambda recovered from a central configuration, alpha * U / I."""
    c = Configuration(positions, params)
    return params.alpha * potential(c) / moment_of_inertia(c)


def potential_hessian(positions, params):
    """Second derivatives of U with respect to the positions (collision-free)."""
    positions = np.asarray(positions, dtype=float)
    masses = params.mass_array
    n = params.n_bodies
    hessian = np.zeros((n, n))
    for k, j in zip(*np.triu_indices(n, 1)):
        r = abs(positions[j] - positions[k])
        curvature = (
            params.coupling * params.alpha * (params.alpha + 1)
            * masses[k] * masses[j] * r ** (-params.alpha - 2)
        )
        hessian[k, k] += curvature
        hessian[j, j] += curvature
        hessian[k, j] -= curvature
        hessian[j, k] -= curvature
    return hessian


def solve_cc(params, order=None, lambda_target=None, initial_gaps=None, max_iter=200):
    """Central configuration with the given ordering, sized so that lambda = lambda_target."""
    if params.n_bodies < 2:
        raise ValidationError("a central configuration needs at least two bodies")
    order = order or OrderLabel.identity(params.n_bodies)
    if len(order) != params.n_bodies:
        raise ValidationError("order length does not match the number of bodies")
    lam = params.cc_lambda if lambda_target is None else float(lambda_target)
    if not lam > 0:
        raise ValidationError("lambda_target must be positive")

    ordered = params.with_masses(params.mass_array[order.indices])
    masses = ordered.mass_array
    jacobian = gap_map(masses)

    def objective(gaps):
        q = jacobian @ gaps
        return float(potential_values(q, ordered)) + 0.5 * lam * float(np.sum(masses * q**2))

    if initial_gaps is None:
        spacing = (params.alpha * params.coupling * params.total_mass / lam) ** (
            1 / (params.alpha + 2)
        )
        gaps = np.full(params.n_bodies - 1, spacing)
    else:
        gaps = np.array(initial_gaps, dtype=float)
        if gaps.shape != (params.n_bodies - 1,) or np.any(gaps <= 0):
            raise ValidationError("initial_gaps must be N-1 positive numbers")

    q = jacobian @ gaps
    defect = cc_defect(q, ordered, lam)
    residual = scaled_cc_residual(q, ordered, lam)
    best, best_q = residual, q
    for iteration in range(max_iter):
        if residual < 1e-14:
            break
        gradient = jacobian.T @ defect
        hessian = jacobian.T @ (potential_hessian(q, ordered) + lam * np.diag(masses)) @ jacobian
        step = -np.linalg.solve(hessian, gradient)

        value = objective(gaps)
        t = 1.0
        while t > 1e-12:
            trial = gaps + t * step
            if np.all(trial > 0):
                trial_q = jacobian @ trial
                trial_defect = cc_defect(trial_q, ordered, lam)
                decreased = objective(trial) <= value + 1e-4 * t * float(gradient @ step)
                if decreased or np.linalg.norm(trial_defect) < np.linalg.norm(defect):
                    break
            t /= 2
        else:
            break

        gaps, q, defect = trial, trial_q, trial_defect
        residual = scaled_cc_residual(q, ordered, lam)
        if residual < best:
            best, best_q = residual, q
        logger.debug("solve_cc %s iter %d residual %.3e step %.3g", order, iteration, residual, t)

    if best > RESIDUAL_TOL:
        raise NewtonDivergence(f"no central configuration found for order {order}", best)

    positions = np.empty(params.n_bodies)
    positions[order.indices] = best_q
    return CentralConfiguration(
        positions=positions,
        lam=lam,
        order=order,
        params=params,
        residual=scaled_cc_residual(positions, params, lam),
    )


def enumerate_ccs(params, lambda_target=None, workers=1):
    """One central configuration per ordering, in lexicographic order of the orderings."""
    if params.n_bodies > MAX_ENUMERATED_BODIES:
        raise ValidationError(
            f"enumeration is limited to N <= {MAX_ENUMERATED_BODIES} bodies"
        )
    orders = [
        OrderLabel(p) for p in itertools.permutations(range(1, params.n_bodies + 1))
    ]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(lambda o: solve_cc(params, o, lambda_target), orders))


def certify_nondegenerate(cc):
    """Attach the smallest |eigenvalue| of the Hessian of U + (lambda/2) I on sum m*q = 0."""
    if cc.residual > DEGENERACY_TOL or scaled_cc_residual(cc.positions, cc.params, cc.lam) > DEGENERACY_TOL:
        raise NotCentralConfiguration(
            f"input is not a central configuration for lambda={cc.lam:.6g}"
        )
    hessian = potential_hessian(cc.positions, cc.params) + cc.lam * np.diag(cc.params.mass_array)
    basis = null_space(cc.params.mass_array[None, :])
    eigenvalues = np.linalg.eigvalsh(basis.T @ hessian @ basis)
    min_eigen_abs = float(np.min(np.abs(eigenvalues)))
    norm = float(np.max(np.abs(eigenvalues)))
    return dataclasses.replace(
        cc,
        min_eigen_abs=min_eigen_abs,
        nondegenerate=min_eigen_abs > DEGENERACY_TOL * norm,
    )


def write_cc_csv(ccs, path):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        n = ccs[0].params.n_bodies if ccs else 0
        writer.writerow(
            ["ordering"] + [f"q{j + 1}" for j in range(n)] + ["lambda", "min_eigen_abs"]
        )
        for cc in ccs:
            writer.writerow(
                [str(cc.order)]
                + [repr(float(x)) for x in cc.positions]
                + [repr(cc.lam), "" if cc.min_eigen_abs is None else repr(cc.min_eigen_abs)]
            )
