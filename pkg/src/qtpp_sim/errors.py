"""Exception types raised by the simulator."""


class SimulationError(Exception):
    """Base class for all simulator errors."""


class ConfigurationError(SimulationError, ValueError):
    """Invalid sizes, counts or configuration values."""


class DomainError(SimulationError, ValueError):
    """Arguments outside the mathematical domain of an operation."""


class EstimationError(SimulationError, ValueError):
    """A statistic could not be estimated (e.g. empty sample)."""
