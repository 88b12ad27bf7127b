from dataclasses import dataclass, field

from models.minimize_result import MinimizeConfig
from models.params import SystemParams
from utils.errors import ValidationError

EXPONENT_SLACK = 0.07


@dataclass(frozen=True)
class CheckTolerances:
    """Numerical thresholds standing in for the exact statements being checked.

    The exponent window defaults to 2/(2+alpha) +- 0.07, i.e. [0.60, 0.74]
    for alpha = 1 (after rounding).
    """

    cc_residual: float = 1e-2
    eom_residual: float = 1e-2
    exponent_low: float = None
    exponent_high: float = None
    min_gap_factor: float = 10.0

    def __post_init__(self):
        for name in ("cc_residual", "eom_residual", "min_gap_factor"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")

    def exponent_window(self, params):
        beta = params.collision_exponent
        low = round(beta - EXPONENT_SLACK, 2) if self.exponent_low is None else self.exponent_low
        high = round(beta + EXPONENT_SLACK, 2) if self.exponent_high is None else self.exponent_high
        return low, high

    def to_dict(self):
        return {
            "cc_residual": self.cc_residual,
            "eom_residual": self.eom_residual,
            "exponent_low": self.exponent_low,
            "exponent_high": self.exponent_high,
            "min_gap_factor": self.min_gap_factor,
        }


@dataclass(frozen=True)
class Analysis:
    collisions: bool = True
    exponent_fits: bool = True
    eom_residuals: bool = True
    surgery_probes: bool = False

    def to_dict(self):
        return {
            "collisions": self.collisions,
            "exponent_fits": self.exponent_fits,
            "eom_residuals": self.eom_residuals,
            "surgery_probes": self.surgery_probes,
        }


@dataclass(frozen=True)
class ExperimentSpec:
    """One fixed-ends problem plus what to run on it and where to write the results."""

    params: SystemParams
    q_i: tuple
    q_f: tuple
    T1: float = 0.0
    T2: float = 1.0
    minimize: MinimizeConfig = field(default_factory=MinimizeConfig)
    analysis: Analysis = field(default_factory=Analysis)
    tolerances: CheckTolerances = field(default_factory=CheckTolerances)
    output_dir: str = None
    seed: int = 0
    name: str = "experiment"

    def __post_init__(self):
        object.__setattr__(self, "q_i", tuple(float(x) for x in self.q_i))
        object.__setattr__(self, "q_f", tuple(float(x) for x in self.q_f))
        object.__setattr__(self, "T1", float(self.T1))
        object.__setattr__(self, "T2", float(self.T2))

    def to_dict(self):
        return {
            "name": self.name,
            "problem": {
                **self.params.to_dict(),
                "q_i": list(self.q_i),
                "q_f": list(self.q_f),
                "T1": self.T1,
                "T2": self.T2,
            },
            "minimize": self.minimize.to_dict(),
            "analysis": self.analysis.to_dict(),
            "tolerances": self.tolerances.to_dict(),
            "output_dir": self.output_dir,
            "seed": self.seed,
        }

    def __repr__(self):
        return f"<ExperimentSpec {self.name} N={self.params.n_bodies} [{self.T1}, {self.T2}]>"


STATUS_EXIT_CODES = {"passed": 0, "failed": 1, "not_converged": 2, "error": 2}


@dataclass(eq=False)
class ExperimentReport:
    """Outcome of one experiment. `timings` and `result` never enter report.json.

    `events` holds the analyzed CollisionEvent objects of the counted moments.
    """

    name: str
    status: str = "error"
    order_i: str = None
    order_f: str = None
    same_order: bool = None
    masses: list = None
    minimize: dict = None
    collision_count: int = None
    events: list = field(default_factory=list)
    sections: list = field(default_factory=list)
    repeated_sections: bool = None
    min_gap: float = None
    eom_residual: float = None
    surgery: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    error: str = None
    output_dir: str = None
    timings: dict = field(default_factory=dict)
    result: object = None

    @property
    def exit_code(self):
        return STATUS_EXIT_CODES[self.status]

    @property
    def converged(self):
        return bool(self.minimize and self.minimize.get("converged"))

    def to_dict(self):
        return {
            "name": self.name,
            "status": self.status,
            "exit_code": self.exit_code,
            "order_i": self.order_i,
            "order_f": self.order_f,
            "same_order": self.same_order,
            "masses": self.masses,
            "minimize": self.minimize,
            "collision_count": self.collision_count,
            "events": [e.to_dict() for e in self.events],
            "sections": self.sections,
            "repeated_sections": self.repeated_sections,
            "min_gap": self.min_gap,
            "eom_residual": self.eom_residual,
            "surgery": self.surgery,
            "checks": self.checks,
            "error": self.error,
        }

    def __repr__(self):
        return f"<ExperimentReport {self.name} status={self.status} collisions={self.collision_count}>"
