"""Exception hierarchy.

Every failure that a certificate can hit is a subclass of :class:`VNFlowError`
so drivers can map them onto exit codes without string matching.
"""


class VNFlowError(Exception):
    """Base class for all library errors."""


class PrecisionExhausted(VNFlowError):
    """An inequality or comparison could not be decided at the working precision."""


class AmbiguousComparison(PrecisionExhausted):
    """A circle comparison sits inside the combined error budget."""


class DegenerateArc(VNFlowError):
    """Arc endpoints coincide (within budget) where distinct endpoints are required."""


class ArcTooLong(VNFlowError):
    """Points are at least 1/2 apart, so no shortest arc exists."""


class InsufficientPrecision(VNFlowError):
    """A decimal input does not carry enough digits for the requested use."""


class NonIrrational(VNFlowError):
    """The rotation number is rational (terminating expansion)."""


class PairTooFar(VNFlowError):
    """The pair is too far apart for the requested construction."""


class DepthExhausted(VNFlowError):
    """More partial quotients are needed than the expansion can supply."""


class NonPositiveRoof(VNFlowError):
    """Positivity of the roof function cannot be certified."""


class NonPositiveIntegral(VNFlowError):
    """The roof integral is not positive, so it cannot be normalised."""


class DistancePreconditionViolated(VNFlowError):
    """Pair distance violates ``||x - y|| < 1/(6 q_n)``."""


class TrichotomyFailure(VNFlowError):
    """None of the three orbit cases holds. Always an implementation bug."""


class EmptyU(VNFlowError):
    """The separation window U is empty."""


class RescaleRequired(VNFlowError):
    """The construction needs slope A = 1; rescale time by 1/A first."""


class DecayNotObserved(VNFlowError):
    """No cancellation index n_eps was found within the step budget."""


class WindowOutOfHorizon(VNFlowError):
    """The interval I_t is not contained in [0, H)."""


class StepBudgetExceeded(VNFlowError):
    """A Birkhoff range is longer than the configured step budget."""


class ConfigError(VNFlowError):
    """Malformed configuration; the message names the offending field."""
