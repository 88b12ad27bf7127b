class BolzaError(Exception):
    """Base class for every error raised by the toolkit."""


class ValidationError(BolzaError, ValueError):
    pass


class SchemaError(ValidationError):
    """Invalid input document; `field` is the dotted path of the offending entry."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class CollisionSingularity(BolzaError):
    pass


class InvalidInterval(ValidationError):
    pass


class MassMismatch(ValidationError):
    pass


class SectorMismatch(ValidationError):
    pass


class NewtonDivergence(BolzaError):
    def __init__(self, message, best_residual):
        self.best_residual = best_residual
        super().__init__(f"{message} (best residual {best_residual:.3e})")


class NotCentralConfiguration(ValidationError):
    pass


class InsufficientWindow(BolzaError):
    pass


class PoorFit(BolzaError):
    pass


class InvalidCluster(ValidationError):
    pass


class ContinuityFailure(BolzaError):
    pass


class WindowNotFound(BolzaError):
    pass


class SegmentContainsCollision(BolzaError):
    pass


class CollisionApproach(BolzaError):
    """Integration halted near a collision; `states` holds the partial trajectory."""

    def __init__(self, message, states):
        self.states = states
        super().__init__(message)


class UnequalMassWarning(UserWarning):
    pass
