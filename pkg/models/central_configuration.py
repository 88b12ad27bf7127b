from dataclasses import dataclass

import numpy as np

from models.configuration import OrderLabel
from models.params import SystemParams


@dataclass(frozen=True, eq=False)
class CentralConfiguration:
    positions: np.ndarray
    lam: float
    order: OrderLabel
    params: SystemParams
    residual: float = 0.0
    min_eigen_abs: float = None
    nondegenerate: bool = None

    def __post_init__(self):
        positions = np.array(self.positions, dtype=float)
        positions.setflags(write=False)
        object.__setattr__(self, "positions", positions)

    @property
    def gaps(self):
        return np.diff(self.positions[self.order.indices])

    def to_dict(self):
        return {
            "order": list(self.order.permutation),
            "positions": self.positions.tolist(),
            "lambda": self.lam,
            "residual": self.residual,
            "min_eigen_abs": self.min_eigen_abs,
            "nondegenerate": self.nondegenerate,
        }

    def __repr__(self):
        return f"<CentralConfiguration order={self.order} lambda={self.lam:.6g}>"
