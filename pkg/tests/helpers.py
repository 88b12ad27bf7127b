import numpy as np

from models.params import SystemParams
from models.path import DiscretePath


def centered_rows(positions, masses):
    masses = np.asarray(masses, dtype=float)
    return positions - (positions @ masses / masses.sum())[:, None]


def random_path(rng, masses, grid_size=20, scale=1.0, alpha=1.0):
    params = SystemParams(masses=tuple(masses), alpha=alpha)
    times = np.linspace(0.0, 1.0, grid_size + 1)
    positions = rng.normal(scale=scale, size=(grid_size + 1, params.n_bodies))
    return DiscretePath(times, centered_rows(positions, masses), params)


def separated_path(rng, masses, grid_size=20, spacing=3.0, wobble=0.3):
    """Random path whose bodies stay far apart and keep the index order."""
    params = SystemParams(masses=tuple(masses))
    times = np.linspace(0.0, 1.0, grid_size + 1)
    slots = spacing * np.arange(params.n_bodies)
    positions = slots + rng.uniform(-wobble, wobble, size=(grid_size + 1, params.n_bodies))
    return DiscretePath(times, centered_rows(positions, masses), params)


def power_law_path(shape, t0, params, grid_size=200, crossing=False):
    """q(t) = shape * |t - t0|^beta, optionally mirrored through the origin after t0."""
    times = np.linspace(0.0, 1.0, grid_size + 1)
    tau = times - t0
    profile = np.abs(tau) ** params.collision_exponent
    if crossing:
        profile = -np.sign(tau) * profile
    return DiscretePath(times, np.outer(profile, shape), params)


