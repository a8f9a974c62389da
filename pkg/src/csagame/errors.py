"""Exception types shared across the engine."""


class ConfigurationError(ValueError):
    """Invalid model, claim, cost or solver parameters."""


class SimulationError(RuntimeError):
    """Non-finite state or other failure during path generation."""


class RegressionError(RuntimeError):
    """Degenerate cross-sectional regression (e.g. no surviving paths)."""


class ContractViolation(RuntimeError):
    """An operation was called outside its stated preconditions."""
