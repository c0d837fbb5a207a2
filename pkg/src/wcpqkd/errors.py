"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of a formula."""


class InfeasibleError(ValueError):
    """A requested error rate cannot be produced by the assumed attack (eta would exceed 1)."""


class ConfigError(ValueError):
    """Invalid protocol, encoding or strategy combination."""


class StrategyRejected(ConfigError):
    """The eavesdropping strategy is physically unavailable for this encoding."""


class UndefinedEstimate(ValueError):
    """An empirical estimator was asked for a value it cannot define (e.g. empty key)."""


class SessionError(RuntimeError):
    """A component failed while processing a session; carries the failing pulse index."""

    def __init__(self, pulse_index, cause):
        super().__init__(f"pulse {pulse_index}: {cause}")
        self.pulse_index = pulse_index
        self.cause = cause
