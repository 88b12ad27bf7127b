import json
from dataclasses import dataclass

import numpy as np

from models.configuration import Configuration, OrderLabel, check_centered
from models.params import SystemParams
from utils.errors import SchemaError, ValidationError


def _check_times(times):
    times = np.array(times, dtype=float).reshape(-1)
    if times.size < 3:
        raise ValidationError("a path needs at least 3 nodes (M >= 2)")
    if not np.all(np.isfinite(times)) or np.any(np.diff(times) <= 0):
        raise ValidationError("times must be finite and strictly increasing")
    times.setflags(write=False)
    return times


@dataclass(frozen=True, eq=False)
class DiscretePath:
    """Piecewise-linear path: one configuration per node of a time grid."""

    times: np.ndarray
    positions: np.ndarray
    params: SystemParams

    def __post_init__(self):
        times = _check_times(self.times)
        positions = np.array(self.positions, dtype=float)
        if positions.shape != (times.size, self.params.n_bodies):
            raise ValidationError(
                f"positions must have shape {(times.size, self.params.n_bodies)}, "
                f"got {positions.shape}"
            )
        for row in positions:
            check_centered(row, self.params)
        positions.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "positions", positions)

    @property
    def T1(self):
        return float(self.times[0])

    @property
    def T2(self):
        return float(self.times[-1])

    @property
    def grid_size(self):
        return self.times.size - 1

    @property
    def nodes(self):
        return [Configuration(row, self.params) for row in self.positions]

    def node(self, i):
        return Configuration(self.positions[i], self.params)

    def at(self, t):
        """Positions of the piecewise-linear path at time `t`."""
        return np.array(
            [np.interp(t, self.times, self.positions[:, j]) for j in range(self.params.n_bodies)]
        )

    def with_positions(self, positions):
        return DiscretePath(self.times, positions, self.params)

    def to_dict(self):
        return {
            **self.params.to_dict(),
            "times": self.times.tolist(),
            "positions": self.positions.tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        for key in ("masses", "times", "positions"):
            if key not in data:
                raise SchemaError(key, "required field is missing")
        params = SystemParams.from_dict(data)
        return cls(np.asarray(data["times"]), np.asarray(data["positions"]), params)

    def __repr__(self):
        return f"<DiscretePath N={self.params.n_bodies} M={self.grid_size} [{self.T1}, {self.T2}]>"


@dataclass(frozen=True, eq=False)
class GapPath:
    """Gap variables x_k = q_(k+1) - q_k, consecutive in `order` (identity by default)."""

    times: np.ndarray
    gaps: np.ndarray
    params: SystemParams
    order: OrderLabel = None

    def __post_init__(self):
        times = _check_times(self.times)
        gaps = np.array(self.gaps, dtype=float)
        if gaps.shape != (times.size, self.params.n_bodies - 1):
            raise ValidationError(
                f"gaps must have shape {(times.size, self.params.n_bodies - 1)}, got {gaps.shape}"
            )
        order = self.order or OrderLabel.identity(self.params.n_bodies)
        if len(order) != self.params.n_bodies:
            raise ValidationError("order length does not match the number of bodies")
        gaps.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "gaps", gaps)
        object.__setattr__(self, "order", order)

    @property
    def ordered_masses(self):
        return self.params.mass_array[self.order.indices]

    def with_gaps(self, gaps, times=None):
        return GapPath(self.times if times is None else times, gaps, self.params, self.order)

    def __repr__(self):
        return f"<GapPath N={self.params.n_bodies} M={self.times.size - 1} order={self.order}>"


def gap_map(masses):
    """Matrix taking gaps to ordered positions with the center of mass at the origin."""
    n = masses.size
    cumulative = np.tril(np.ones((n, n - 1)), -1)
    centering = np.eye(n) - np.outer(np.ones(n), masses) / masses.sum()
    return centering @ cumulative


def gaps_to_positions(gaps, params, order):
    """Positions (..., N) from gap rows (..., N-1), center of mass at the origin."""
    gaps = np.asarray(gaps, dtype=float)
    masses = params.mass_array[order.indices]
    ordered = np.concatenate(
        [np.zeros(gaps.shape[:-1] + (1,)), np.cumsum(gaps, axis=-1)], axis=-1
    )
    ordered = ordered - (ordered @ masses)[..., None] / masses.sum()
    positions = np.empty_like(ordered)
    positions[..., order.indices] = ordered
    return positions


def to_gaps(p, order=None):
    order = order or OrderLabel.identity(p.params.n_bodies)
    ordered = p.positions[:, order.indices]
    return GapPath(p.times, np.diff(ordered, axis=1), p.params, order)


def to_path(g):
    return DiscretePath(g.times, gaps_to_positions(g.gaps, g.params, g.order), g.params)


def path_to_json(p, indent=None):
    return json.dumps(p.to_dict(), indent=indent)


def path_from_json(text):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"line {e.lineno}", e.msg) from e
    return DiscretePath.from_dict(data)
