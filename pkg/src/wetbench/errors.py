"""Exception hierarchy shared by all wetbench modules."""


class WetbenchError(Exception):
    """Base class for all wetbench errors."""


class OutOfRange(WetbenchError):
    """A parameter lies outside its admissible range."""


class NotPositiveSemidefinite(WetbenchError):
    """A user-supplied correlation matrix is not PSD (or not symmetric/unit-diagonal)."""


class FactorizationFailure(WetbenchError):
    """Correlation matrix is numerically indefinite beyond tolerance."""


class NegativeInput(WetbenchError):
    """RF power input must be non-negative."""


class NonPositive(WetbenchError):
    """Value must be strictly positive (e.g. mW argument of a dBm conversion)."""


class NonPositiveDistance(WetbenchError):
    """Path-loss distances must be strictly positive."""


class NonConvergence(WetbenchError):
    """A series or quadrature failed to converge within its iteration cap."""


class EdgeMismatch(WetbenchError):
    """Two histograms being compared do not share identical bin edges."""


class Infeasible(WetbenchError):
    """A constrained random construction could not satisfy its target."""


class BudgetExceeded(WetbenchError):
    """An iterative search exceeded its evaluation budget."""


class EmptyCandidateSet(WetbenchError):
    """A plan sweep was invoked with no candidates."""


class ConfigError(WetbenchError):
    """An experiment configuration is malformed (unknown key, bad value, ...)."""
