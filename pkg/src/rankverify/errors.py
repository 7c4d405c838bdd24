"""Exception hierarchy shared by every module."""


class RankVerifyError(Exception):
    """Base class for errors raised by rankverify."""


class DomainError(RankVerifyError, ValueError):
    """Argument outside the domain of a numerical primitive."""


class DegenerateTruncationError(RankVerifyError, ArithmeticError):
    """A truncation interval has zero (or negative) width."""


class ModelValidationError(RankVerifyError, ValueError):
    """The (x, sigma) pair violates one or more model invariants.

    ``problems`` lists every violation found, not just the first.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class SelectionError(RankVerifyError, ValueError):
    """Invalid top-k request or index on the wrong side of the partition."""


class BoundaryTieError(SelectionError):
    """The k-th and (k+1)-th largest observations are exactly equal."""


class NotPSDError(RankVerifyError, ValueError):
    """Covariance cannot be factorized for sampling."""


class SigmaMismatchError(RankVerifyError, ValueError):
    """A quantile was computed for a different covariance than the model's."""


class InsufficientConditioningError(RankVerifyError, RuntimeError):
    """Too few simulated draws landed on the conditioning event."""

    def __init__(self, events, reps, minimum):
        self.events = events
        self.reps = reps
        self.minimum = minimum
        self.event_rate = events / reps if reps else 0.0
        super().__init__(
            f"only {events} of {reps} draws hit the conditioning event "
            f"(rate {self.event_rate:.6g}); need at least {minimum}"
        )
