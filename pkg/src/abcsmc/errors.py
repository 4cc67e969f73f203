"""Exception types shared across the package."""


class AbcError(Exception):
    """Base class for all package errors."""


class ConfigError(AbcError):
    """Invalid run configuration (bad key, missing value, out-of-range)."""


class SimulationError(AbcError):
    """A model simulator raised; the failure is tagged and aborts the run.

    Simulator failures are never retried or swallowed: whatever the
    simulator raised is chained as ``__cause__``.
    """

    def __init__(self, message, theta=None):
        super().__init__(message)
        self.theta = theta


class DegenerateArrayError(AbcError):
    """A particle array has too little spread to continue (e.g. fewer than
    two distinct parameter vectors when a proposal covariance is needed,
    or a zero-variance first batch during initialisation)."""


class ScheduleInfeasibleError(AbcError):
    """A fixed tolerance schedule asked for a level no current particle
    satisfies, so the sampler cannot proceed."""


class BudgetExceededError(AbcError):
    """The initialisation stage hit its batch cap before meeting its exit
    conditions.  ``partial`` carries the state computed so far."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
