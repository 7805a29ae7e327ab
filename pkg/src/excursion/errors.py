"""Exception types shared across the package."""


class ExcursionError(Exception):
    """Base class for all library errors."""


class PrecisionError(ExcursionError):
    """A comparison or decision is undecidable at the available precision."""


class StreamExhaustedError(ExcursionError):
    """A finite quotient stream ran out of terms."""


class WindowEmptyError(ExcursionError):
    """No admissible quotient lands in a prescribed growth window."""

    def __init__(self, step: int, message: str):
        self.step = step
        super().__init__(f"step {step}: {message}")


class BudgetExceededError(ExcursionError):
    """An exhaustive enumeration would exceed its configured budget."""


class CertificationError(ExcursionError):
    """A certificate, invariant, or construction inequality failed.

    ``locus`` names the failing check so callers can report or retry.
    """

    def __init__(self, locus: str, message: str):
        self.locus = locus
        super().__init__(f"{locus}: {message}")
