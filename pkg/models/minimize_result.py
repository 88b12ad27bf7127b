from dataclasses import dataclass, field

import numpy as np

from models.configuration import OrderLabel
from models.path import DiscretePath
from utils.errors import ValidationError


def geometric_schedule(start=1e-1, stop=1e-6, ratio=0.5):
    schedule = []
    eps = start
    while eps >= stop * (1 - 1e-12):
        schedule.append(eps)
        eps *= ratio
    return tuple(schedule)


@dataclass(frozen=True)
class MinimizeConfig:
    grid_size: int = 256
    eps_schedule: tuple = field(default_factory=geometric_schedule)
    max_iters_per_eps: int = 2000
    grad_tol: float = 1e-8
    order_sector: OrderLabel = None
    seed: int = 0

    def __post_init__(self):
        schedule = tuple(float(e) for e in self.eps_schedule)
        object.__setattr__(self, "eps_schedule", schedule)
        if not schedule:
            raise ValidationError("eps_schedule must not be empty")
        if any(e <= 0 for e in schedule) or any(b >= a for a, b in zip(schedule, schedule[1:])):
            raise ValidationError("eps_schedule must be positive and strictly decreasing")
        if self.grid_size < 8:
            raise ValidationError("grid_size must be at least 8")
        if self.max_iters_per_eps < 1:
            raise ValidationError("max_iters_per_eps must be positive")
        if not self.grad_tol > 0:
            raise ValidationError("grad_tol must be positive")

    def to_dict(self):
        return {
            "grid_size": self.grid_size,
            "eps_schedule": list(self.eps_schedule),
            "max_iters_per_eps": self.max_iters_per_eps,
            "grad_tol": self.grad_tol,
            "order_sector": None if self.order_sector is None else list(self.order_sector.permutation),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data):
        sector = data.get("order_sector")
        kwargs = {
            key: data[key]
            for key in ("grid_size", "max_iters_per_eps", "grad_tol", "seed")
            if key in data
        }
        if "eps_schedule" in data:
            kwargs["eps_schedule"] = tuple(data["eps_schedule"])
        return cls(order_sector=None if sector is None else OrderLabel(sector), **kwargs)


@dataclass(frozen=True, eq=False)
class MinimizeResult:
    path: DiscretePath
    action_value: float
    converged: bool
    eps_final: float
    iterations: int
    gradient_norm: float
    trace: np.ndarray = None

    def summary(self):
        return {
            "action": self.action_value,
            "converged": self.converged,
            "eps_final": self.eps_final,
            "iterations": self.iterations,
            "gradient_norm": self.gradient_norm,
            "grid_size": self.path.grid_size,
        }

    def __repr__(self):
        return (
            f"<MinimizeResult action={self.action_value:.10g} converged={self.converged} "
            f"iterations={self.iterations}>"
        )
