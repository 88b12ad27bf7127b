from dataclasses import dataclass

import numpy as np

from models.params import SystemParams
from utils.errors import ValidationError

COM_TOL = 1e-12


def center_of_mass_defect(positions, masses):
    positions = np.asarray(positions, dtype=float)
    return float(np.dot(masses, positions))


def check_centered(positions, params):
    """Raise unless the mass-weighted sum of `positions` vanishes."""
    positions = np.asarray(positions, dtype=float)
    scale = COM_TOL * (float(np.max(np.abs(positions))) + 1.0)
    defect = center_of_mass_defect(positions, params.mass_array)
    if abs(defect) > scale:
        raise ValidationError(
            f"center of mass is not at the origin (sum m*q = {defect:.3e})"
        )


@dataclass(frozen=True, eq=False)
class Configuration:
    """One time-slice of N collinear bodies, center of mass at the origin."""

    positions: np.ndarray
    params: SystemParams

    def __post_init__(self):
        positions = np.array(self.positions, dtype=float).reshape(-1)
        if positions.size != self.params.n_bodies:
            raise ValidationError(
                f"expected {self.params.n_bodies} positions, got {positions.size}"
            )
        if not np.all(np.isfinite(positions)):
            raise ValidationError("positions must be finite")
        check_centered(positions, self.params)
        positions.setflags(write=False)
        object.__setattr__(self, "positions", positions)

    @classmethod
    def centered(cls, positions, params):
        """Build a configuration after moving the center of mass to the origin."""
        positions = np.asarray(positions, dtype=float)
        shift = np.dot(params.mass_array, positions) / params.total_mass
        return cls(positions - shift, params)

    @property
    def n_bodies(self):
        return self.params.n_bodies

    def to_dict(self):
        return {"positions": self.positions.tolist(), **self.params.to_dict()}

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        return self.params == other.params and np.array_equal(
            self.positions, other.positions
        )

    def __repr__(self):
        return f"<Configuration {np.array2string(self.positions, precision=4)}>"


@dataclass(frozen=True)
class OrderLabel:
    """Body indices (1-based) listed from left to right."""

    permutation: tuple
    degenerate: bool = False

    def __post_init__(self):
        permutation = tuple(int(j) for j in self.permutation)
        if sorted(permutation) != list(range(1, len(permutation) + 1)):
            raise ValidationError(f"{permutation} is not a permutation of 1..N")
        object.__setattr__(self, "permutation", permutation)

    @classmethod
    def identity(cls, n_bodies):
        return cls(tuple(range(1, n_bodies + 1)))

    @classmethod
    def from_indices(cls, indices, degenerate=False):
        return cls(tuple(int(i) + 1 for i in indices), degenerate)

    @property
    def indices(self):
        """0-based body indices from left to right."""
        return np.asarray(self.permutation) - 1

    def reversed(self):
        return OrderLabel(self.permutation[::-1], self.degenerate)

    def __len__(self):
        return len(self.permutation)

    def __str__(self):
        return "(" + ",".join(str(j) for j in self.permutation) + ")"


def order_of(c):
    """Order label of a configuration; ties below collision_tol keep index order."""
    positions = c.positions
    order = np.lexsort((np.arange(positions.size), positions))
    sorted_positions = positions[order]
    gaps = np.diff(sorted_positions)
    tied = gaps < c.params.collision_tol

    # bodies within collision_tol of each other are listed by index
    if np.any(tied):
        blocks = np.concatenate(([0], np.cumsum(~tied)))
        order = order[np.lexsort((order, blocks))]
    return OrderLabel.from_indices(order, degenerate=bool(np.any(tied)))


def same_order(a, b):
    """Literal pairwise test: q_aj - q_ak >= 0 iff q_bj - q_bk >= 0 for all j != k."""
    da = a.positions[:, None] - a.positions[None, :]
    db = b.positions[:, None] - b.positions[None, :]
    return bool(np.all((da >= 0) == (db >= 0)))
