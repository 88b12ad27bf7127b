from dataclasses import dataclass, field

import numpy as np

from utils.errors import ValidationError


@dataclass(frozen=True)
class SystemParams:
    """Masses, potential exponent and tolerances shared by all numerics."""

    masses: tuple
    alpha: float = 1.0
    coupling: float = 1.0
    collision_tol: float = 1e-3
    quadrature_refinement: int = 8
    n_bodies: int = field(init=False)

    def __post_init__(self):
        masses = tuple(float(m) for m in np.ravel(self.masses))
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "n_bodies", len(masses))

        if not masses:
            raise ValidationError("masses must not be empty")
        if any(not m > 0 for m in masses):
            raise ValidationError("all masses must be strictly positive")
        if not 0 < self.alpha < 2:
            raise ValidationError(f"alpha must lie in (0, 2), got {self.alpha}")
        if not self.coupling > 0:
            raise ValidationError("coupling must be positive")
        if not self.collision_tol > 0:
            raise ValidationError("collision_tol must be positive")
        if int(self.quadrature_refinement) < 1:
            raise ValidationError("quadrature_refinement must be a positive integer")
        object.__setattr__(self, "quadrature_refinement", int(self.quadrature_refinement))

    @property
    def mass_array(self):
        return np.asarray(self.masses)

    @property
    def total_mass(self):
        return float(sum(self.masses))

    @property
    def equal_masses(self):
        return len(set(self.masses)) == 1

    @property
    def collision_exponent(self):
        """Power of |t - t0| in the collision asymptotics, 2/(2+alpha)."""
        return 2.0 / (2.0 + self.alpha)

    @property
    def cc_lambda(self):
        """Normalization of the blow-up central configuration, 2*alpha/(2+alpha)**2."""
        return 2.0 * self.alpha / (2.0 + self.alpha) ** 2

    def subsystem(self, indices):
        """Params for the bodies in `indices` (0-based), e.g. a colliding cluster."""
        return SystemParams(
            masses=tuple(self.masses[i] for i in indices),
            alpha=self.alpha,
            coupling=self.coupling,
            collision_tol=self.collision_tol,
            quadrature_refinement=self.quadrature_refinement,
        )

    def with_masses(self, masses):
        return SystemParams(
            masses=tuple(masses),
            alpha=self.alpha,
            coupling=self.coupling,
            collision_tol=self.collision_tol,
            quadrature_refinement=self.quadrature_refinement,
        )

    def to_dict(self):
        return {
            "masses": list(self.masses),
            "alpha": self.alpha,
            "coupling": self.coupling,
            "collision_tol": self.collision_tol,
            "quadrature_refinement": self.quadrature_refinement,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            masses=tuple(data["masses"]),
            alpha=float(data.get("alpha", 1.0)),
            coupling=float(data.get("coupling", 1.0)),
            collision_tol=float(data.get("collision_tol", 1e-3)),
            quadrature_refinement=int(data.get("quadrature_refinement", 8)),
        )

    def __repr__(self):
        return f"<SystemParams N={self.n_bodies} alpha={self.alpha}>"
