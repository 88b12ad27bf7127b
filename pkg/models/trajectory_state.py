from dataclasses import dataclass

import numpy as np

from models.params import SystemParams
from utils.action import energy
from utils.errors import ValidationError

DRIFT_TOL = 1e-9


def _check_balanced(values, params, name):
    scale = DRIFT_TOL * (float(np.max(np.abs(values))) + 1.0) * max(1.0, params.total_mass)
    defect = float(np.dot(params.mass_array, values))
    if abs(defect) > scale:
        raise ValidationError(f"mass-weighted sum of {name} is {defect:.3e}, expected 0")


@dataclass(frozen=True, eq=False)
class TrajectoryState:
    """Positions and velocities at one instant; center of mass at rest at the origin."""

    time: float
    positions: np.ndarray
    velocities: np.ndarray
    params: SystemParams

    def __post_init__(self):
        positions = np.array(self.positions, dtype=float).reshape(-1)
        velocities = np.array(self.velocities, dtype=float).reshape(-1)
        n = self.params.n_bodies
        if positions.size != n or velocities.size != n:
            raise ValidationError(f"positions and velocities need {n} entries each")
        _check_balanced(positions, self.params, "positions")
        _check_balanced(velocities, self.params, "velocities")
        positions.setflags(write=False)
        velocities.setflags(write=False)
        object.__setattr__(self, "time", float(self.time))
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "velocities", velocities)

    @property
    def energy(self):
        return energy(self.positions, self.velocities, self.params)

    @property
    def min_gap(self):
        return float(np.min(np.diff(np.sort(self.positions))))

    def reversed(self):
        """Same positions with velocities flipped (time-reversal)."""
        return TrajectoryState(self.time, self.positions, -self.velocities, self.params)

    def to_dict(self):
        return {
            "t": self.time,
            "positions": self.positions.tolist(),
            "velocities": self.velocities.tolist(),
            "energy": self.energy,
        }

    def __repr__(self):
        return f"<TrajectoryState t={self.time:.6g} E={self.energy:.10g}>"
