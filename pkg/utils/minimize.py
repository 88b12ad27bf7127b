"""Fixed-ends minimization of the discretized action with eps-continuation.

Each eps stage runs scipy's L-BFGS-B (strong-Wolfe line search) warm-started
from the previous stage. Endpoints never enter the variable vector. The
unconstrained problem works in an orthonormal basis of the zero center of
mass subspace; the sector-restricted problem works in sector gap variables
with the bound x >= 0, so iterates can reach the collision boundary.

L-BFGS-B stops once the action no longer decreases in floating point, which
on fine grids leaves the gradient a decade above grad_tol. The last stage is
then finished with Newton steps on a banded finite-difference Hessian; those
steps only need the gradient to be accurate.
"""

import numpy as np
from scipy.linalg import LinAlgError, null_space, solve_banded
from scipy.optimize import minimize as scipy_minimize

from extensions import log
from models.configuration import OrderLabel
from models.minimize_result import MinimizeConfig, MinimizeResult
from models.path import DiscretePath, gap_map, gaps_to_positions
from utils.action import evaluate_action
from utils.errors import InvalidInterval, MassMismatch, SectorMismatch, ValidationError

logger = log.getChild("minimize")

SEED_PERTURBATION = 1e-3
FD_STEP = 1e-6
POLISH_STEPS = 8
POLISH_HALVINGS = 20


def _check_problem(q_i, q_f, T1, T2):
    if not T2 > T1:
        raise InvalidInterval(f"T2 must exceed T1 (got T1={T1}, T2={T2})")
    if q_i.params != q_f.params:
        raise MassMismatch("endpoint configurations use different system parameters")
    if q_i.params.n_bodies < 2:
        raise ValidationError("the fixed-ends problem needs at least two bodies")


def seed_perturbation(q_i, q_f, times, seed=0):
    """Deterministic interior noise vanishing at both ends, center of mass preserved."""
    times = np.asarray(times, dtype=float)
    params = q_i.params
    displacement = float(np.max(np.abs(q_f.positions - q_i.positions)))
    extent = float(max(np.max(np.abs(q_i.positions)), np.max(np.abs(q_f.positions))))
    scale = SEED_PERTURBATION * max(displacement, extent)

    rng = np.random.default_rng(seed)
    noise = rng.uniform(-1.0, 1.0, size=(times.size, params.n_bodies))
    envelope = np.sin(np.pi * (times - times[0]) / (times[-1] - times[0]))
    noise *= envelope[:, None]
    noise -= np.outer(noise @ params.mass_array, np.ones(params.n_bodies)) / params.total_mass
    noise[[0, -1]] = 0.0
    return scale * noise


def straight_line_seed(q_i, q_f, times, seed=0):
    times = np.asarray(times, dtype=float)
    s = (times - times[0]) / (times[-1] - times[0])
    positions = np.outer(1 - s, q_i.positions) + np.outer(s, q_f.positions)
    positions += seed_perturbation(q_i, q_f, times, seed)
    positions[0] = q_i.positions
    positions[-1] = q_f.positions
    return DiscretePath(times, positions, q_i.params)


def _banded_hessian(gradient_of, x, block):
    """Finite-difference Hessian of a nodal objective in solve_banded layout.

    Variables are stored node-major with `block` per node and only neighbouring
    nodes interact, so three node colors per variable recover every column.
    """
    n = x.size
    nodes = n // block
    bandwidth = 2 * block - 1
    delta = FD_STEP * max(1.0, float(np.max(np.abs(x))))
    banded = np.zeros((2 * bandwidth + 1, n))
    for color in range(3):
        for j in range(block):
            columns = np.arange(color, nodes, 3) * block + j
            offset = np.zeros(n)
            offset[columns] = delta
            change = (gradient_of(x + offset) - gradient_of(x - offset)) / (2 * delta)
            for column in columns:
                node = column // block
                rows = np.arange(max(0, (node - 1) * block), min(n, (node + 2) * block))
                banded[bandwidth + rows - column, column] = change[rows]
    return bandwidth, banded


def _polish(x, objective, projected_norm, block, bounds, tolerance):
    """Damped Newton steps on the final stage once L-BFGS-B stalls on round-off.

    A step is taken only if it lowers the projected gradient without raising
    the action beyond round-off.
    """
    if bounds is not None and np.any(x <= 0):
        logger.debug("collision bound active; skipping the Newton polish")
        return x, []

    def gradient_of(z):
        return objective(z)[1]

    value, gradient = objective(x)
    norm = projected_norm(x, gradient)
    rows = []
    for _ in range(POLISH_STEPS):
        if norm <= tolerance:
            break
        bandwidth, banded = _banded_hessian(gradient_of, x, block)
        try:
            step = solve_banded((bandwidth, bandwidth), banded, -gradient)
        except (LinAlgError, ValueError):
            break
        t = 1.0
        for _ in range(POLISH_HALVINGS):
            trial = x + t * step
            if bounds is None or np.all(trial >= 0):
                trial_value, trial_gradient = objective(trial)
                trial_norm = projected_norm(trial, trial_gradient)
                if trial_norm < norm and trial_value <= value + 1e-12 * max(1.0, abs(value)):
                    break
            t /= 2
        else:
            break
        x, value, gradient, norm = trial, trial_value, trial_gradient, trial_norm
        rows.append((value, norm))
    return x, rows


def _descend(times, q_i, q_f, x0, unpack, pull_back, bounds, cfg):
    """Run the eps schedule; returns the final variables and bookkeeping."""
    params = q_i.params

    def assemble(x):
        return np.vstack([q_i.positions, unpack(x), q_f.positions])

    def objective(x, eps):
        value, gradient = evaluate_action(times, assemble(x), params, eps, with_gradient=True)
        return value, pull_back(gradient[1:-1])

    def projected_norm(x, gradient):
        if bounds is not None:
            gradient = np.where((x <= 0) & (gradient > 0), 0.0, gradient)
        return float(np.max(np.abs(gradient))) if gradient.size else 0.0

    x = np.array(x0, dtype=float)
    trace = []
    iterations = 0
    gradient_norm = np.inf
    value = np.nan
    for eps in cfg.eps_schedule:
        cache = {}

        def fun(z, eps=eps):
            value, gradient = objective(z, eps)
            cache.update(x=z.copy(), value=value, gradient=gradient)
            return value, gradient

        def record(xk, eps=eps):
            if "x" not in cache or not np.array_equal(xk, cache["x"]):
                fun(xk)
            trace.append(
                (eps, len(trace), cache["value"], projected_norm(xk, cache["gradient"]))
            )

        start_value, _ = objective(x, eps)
        gtol = cfg.grad_tol * max(1.0, abs(start_value))
        result = scipy_minimize(
            fun,
            x,
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            callback=record,
            options={
                "maxiter": cfg.max_iters_per_eps,
                "gtol": gtol,
                "ftol": 1e-15,
                "maxcor": 20,
                "maxls": 50,
            },
        )
        x = result.x
        iterations += int(result.nit)
        value, gradient = objective(x, eps)
        gradient_norm = projected_norm(x, gradient)
        logger.info(
            "eps=%.3e iters=%d action=%.12g grad=%.3e (%s)",
            eps, result.nit, value, gradient_norm, result.message,
        )

    eps = cfg.eps_schedule[-1]
    tolerance = cfg.grad_tol * max(1.0, abs(value))
    if gradient_norm > tolerance:
        block = params.n_bodies - 1
        x, polished = _polish(
            x, lambda z: objective(z, eps), projected_norm, block, bounds, tolerance
        )
        for value, gradient_norm in polished:
            trace.append((eps, len(trace), value, gradient_norm))
        iterations += len(polished)
        if polished:
            logger.info("newton polish: %d steps, grad=%.3e", len(polished), gradient_norm)
    return x, assemble, value, gradient_norm, iterations, np.array(trace).reshape(-1, 4)


def _finish(times, q_i, cfg, x, assemble, value, gradient_norm, iterations, trace):
    path = DiscretePath(times, assemble(x), q_i.params)
    eps_final = cfg.eps_schedule[-1]
    tolerance = cfg.grad_tol * max(1.0, abs(value))
    converged = bool(gradient_norm <= tolerance)
    if not converged:
        logger.warning(
            "minimizer stopped with gradient %.3e above tolerance %.3e", gradient_norm, tolerance
        )
    return MinimizeResult(
        path=path,
        action_value=evaluate_action(path.times, path.positions, path.params, eps_final),
        converged=converged,
        eps_final=eps_final,
        iterations=iterations,
        gradient_norm=gradient_norm,
        trace=trace,
    )


def minimize(q_i, q_f, T1, T2, cfg=None):
    """Minimize the action over paths joining q_i at T1 to q_f at T2."""
    cfg = cfg or MinimizeConfig()
    _check_problem(q_i, q_f, T1, T2)
    if cfg.order_sector is not None:
        return minimize_in_sector(q_i, q_f, T1, T2, cfg.order_sector, cfg)

    params = q_i.params
    times = np.linspace(T1, T2, cfg.grid_size + 1)
    seed = straight_line_seed(q_i, q_f, times, cfg.seed)
    basis = null_space(params.mass_array[None, :])
    inner_shape = (cfg.grid_size - 1, params.n_bodies - 1)

    def unpack(x):
        return x.reshape(inner_shape) @ basis.T

    def pull_back(gradient):
        return (gradient @ basis).ravel()

    x0 = (seed.positions[1:-1] @ basis).ravel()
    x, assemble, value, gradient_norm, iterations, trace = _descend(
        times, q_i, q_f, x0, unpack, pull_back, None, cfg
    )

    # the seed bounds the result; restart the last stage from it if descent lost that
    eps_final = cfg.eps_schedule[-1]
    seed_value = evaluate_action(times, seed.positions, params, eps_final)
    if value > seed_value:
        logger.warning("continuation ended above the seed action; restarting last stage")
        last_stage = MinimizeConfig(
            grid_size=cfg.grid_size,
            eps_schedule=(eps_final,),
            max_iters_per_eps=cfg.max_iters_per_eps,
            grad_tol=cfg.grad_tol,
            seed=cfg.seed,
        )
        x, assemble, value, gradient_norm, more, restarted = _descend(
            times, q_i, q_f, x0, unpack, pull_back, None, last_stage
        )
        iterations += more
        trace = np.vstack([trace, restarted])
        trace[:, 1] = np.arange(len(trace))
    return _finish(times, q_i, cfg, x, assemble, value, gradient_norm, iterations, trace)


def sector_gaps(positions, sector):
    positions = np.asarray(positions, dtype=float)
    return np.diff(positions[..., sector.indices], axis=-1)


def minimize_in_sector(q_i, q_f, T1, T2, sector, cfg=None):
    """Minimize among paths whose sector gaps stay >= 0 (order fixed up to collisions).

    In sector gap variables the action is the gap functional of the Lagrangian
    identity; values and gradients are evaluated through the positions.
    """
    cfg = cfg or MinimizeConfig()
    _check_problem(q_i, q_f, T1, T2)
    if not isinstance(sector, OrderLabel):
        sector = OrderLabel(tuple(sector))
    params = q_i.params
    if len(sector) != params.n_bodies:
        raise ValidationError("sector length does not match the number of bodies")
    for name, q in (("q_i", q_i), ("q_f", q_f)):
        gaps = sector_gaps(q.positions, sector)
        if np.any(gaps < -1e-12 * (float(np.max(np.abs(q.positions))) + 1.0)):
            raise SectorMismatch(f"{name} lies outside the closed sector {sector}")

    times = np.linspace(T1, T2, cfg.grid_size + 1)
    seed = straight_line_seed(q_i, q_f, times, cfg.seed)
    inner_shape = (cfg.grid_size - 1, params.n_bodies - 1)
    jacobian = gap_map(params.mass_array[sector.indices])

    def unpack(x):
        return gaps_to_positions(x.reshape(inner_shape), params, sector)

    def pull_back(gradient):
        return (gradient[:, sector.indices] @ jacobian).ravel()

    x0 = np.clip(sector_gaps(seed.positions[1:-1], sector), 0.0, None).ravel()
    bounds = [(0.0, None)] * x0.size
    x, assemble, value, gradient_norm, iterations, trace = _descend(
        times, q_i, q_f, x0, unpack, pull_back, bounds, cfg
    )
    return _finish(times, q_i, cfg, x, assemble, value, gradient_norm, iterations, trace)


def write_trace_csv(result, path):
    np.savetxt(
        path,
        result.trace,
        delimiter=",",
        header="eps,iter,action,grad_norm",
        comments="",
        fmt="%.17g",
    )
