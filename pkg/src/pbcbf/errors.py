"""Exception types shared across the package."""


class PbcbfError(Exception):
    """Base class for all package-specific errors."""


class NumericalError(PbcbfError):
    """A numerical evaluation produced a non-finite value."""


class DomainError(PbcbfError):
    """A state left the operating domain of a model (e.g. a coordinate singularity)."""


class HorizonExceeded(PbcbfError):
    """Event-terminated propagation hit the time horizon before the stop condition fired."""

    def __init__(self, message, t_max=None, last_time=None, last_state=None):
        super().__init__(message)
        self.t_max = t_max
        self.last_time = last_time
        self.last_state = last_state


class PolicyFailure(PbcbfError):
    """The stopping policy did not bring the barrier rate to zero within the horizon."""


class ZeroGradient(PbcbfError):
    """A barrier gradient vanished where a nonzero one is required."""


class ZeroGradientWarning(UserWarning):
    """The input-map gradient vanished; the stopping policy falls back to zero input."""


class MultipleActive(PbcbfError):
    """Two opposed barriers reported a negative rate at once, violating exclusivity."""


class SingularMassMatrix(PbcbfError):
    """The rate-coupling matrix of the aircraft model is numerically singular."""


class TrimNotConverged(PbcbfError):
    """Trim iteration failed to reach the residual tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class UnsupportedDimension(PbcbfError):
    """The exact small-problem solver only supports up to three inputs."""


class Infeasible(PbcbfError):
    """The safety-filter quadratic program has an empty feasible region."""


class ScenarioError(PbcbfError):
    """A scenario description is malformed or violates its load-time invariants."""


class OutputError(PbcbfError):
    """Writing a trace or metrics file failed; the message carries the path."""
