"""Exception types shared across the package."""


class BridgekitError(Exception):
    """Base class for all library errors."""


class ContractError(BridgekitError, ValueError):
    """A function precondition was violated by the caller."""


class ConfigError(BridgekitError, ValueError):
    """User-supplied configuration is malformed or inconsistent."""


class SimulationDiverged(BridgekitError, RuntimeError):
    """An SDE trajectory left the allowed state region."""

    def __init__(self, message, step=None, magnitude=None):
        super().__init__(message)
        self.step = step
        self.magnitude = magnitude


class TrainingAborted(BridgekitError, RuntimeError):
    """Training hit a non-finite loss or gradient.

    Carries the last finite loss breakdown seen before the abort, when
    one exists, so callers can report how far the run got.
    """

    def __init__(self, message, last_breakdown=None):
        super().__init__(message)
        self.last_breakdown = last_breakdown
