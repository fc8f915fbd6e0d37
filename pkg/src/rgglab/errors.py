"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class EmptyCapError(DomainError):
    """A cap with threshold >= 1 has no interior to sample from."""


class UnsupportedSizeError(DomainError):
    """Exact enumeration was requested for a graph space that is too large."""


class NumericError(ArithmeticError):
    """An iterative routine failed to converge within its budget."""


class BudgetExhaustedError(RuntimeError):
    """Rejection sampling used up its draw budget without an acceptance."""

    def __init__(self, attempts, message=None):
        self.attempts = int(attempts)
        super().__init__(message or f"no accepted sample after {self.attempts} draws")


class InsufficientAcceptanceError(RuntimeError):
    """Too few accepted Monte Carlo samples to form a reliable estimate."""

    def __init__(self, accepted, required, pair_index=None):
        self.accepted = int(accepted)
        self.required = int(required)
        self.pair_index = pair_index
        where = "" if pair_index is None else f" at pair index {pair_index}"
        super().__init__(
            f"only {self.accepted} accepted samples (need {self.required}){where}"
        )
