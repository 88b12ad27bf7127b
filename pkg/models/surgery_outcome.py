from dataclasses import dataclass, field

from models.path import DiscretePath


@dataclass(frozen=True, eq=False)
class SurgeryOutcome:
    """Result of a path operation with the action before and after it."""

    path: DiscretePath
    action_before: float
    action_after: float
    applied: bool
    detail: dict = field(default_factory=dict)

    @property
    def action_change(self):
        return self.action_after - self.action_before

    def to_dict(self):
        return {
            "applied": self.applied,
            "action_before": self.action_before,
            "action_after": self.action_after,
            "action_change": self.action_change,
            "detail": self.detail,
        }

    def __repr__(self):
        return (
            f"<SurgeryOutcome applied={self.applied} "
            f"before={self.action_before:.10g} after={self.action_after:.10g}>"
        )
