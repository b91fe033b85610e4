"""
Exceptions raised by the simulation modules.

All of them derive from ValueError so callers that only validate input can
catch the broad class.
"""


class SimulationError(ValueError):
    """Base class for every error raised by the simulator."""


class DimensionCapError(SimulationError):
    """The requested Fock basis would exceed the configured dimension cap."""


class TruncationError(SimulationError):
    """A nonzero amplitude would fall outside the truncated basis."""


class InvalidModeError(SimulationError):
    """A mode index is outside the state's mode range."""


class BasisMismatchError(SimulationError):
    """Two operands are expressed over different Fock bases."""


class NonUnitaryError(SimulationError):
    """A mode transformation is not unitary within tolerance."""


class ParameterRangeError(SimulationError):
    """A reflectivity or efficiency lies outside [0, 1]."""


class NearZeroTraceError(SimulationError):
    """Post-selection left (numerically) nothing to normalize.

    Attributes:
        trace (float): The trace that fell below the threshold.
        where (str): Grid point or input being evaluated, when known.
    """

    def __init__(self, trace, threshold, where=None):
        message = (
            f"trace {trace:.3e} below threshold {threshold:.1e}; "
            "the detection pattern is impossible for this input"
        )
        super().__init__(f"{message} (at {where})" if where else message)
        self.trace = trace
        self.threshold = threshold
        self.where = where


class ConfigError(SimulationError):
    """Invalid run configuration."""
