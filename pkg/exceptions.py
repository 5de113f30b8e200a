class FindiffError(Exception):
    """Base class for every error raised by the laboratory."""


class DomainError(FindiffError, ValueError):
    """An argument lies outside the domain of the requested operation."""


class ConfigurationError(FindiffError):
    """The requested precision or environment setting cannot be honoured."""


class PrecisionLossError(FindiffError):
    """A certified result could not be obtained within the escalation budget."""

    def __init__(self, n: int, bits: int, detail: str):
        self.n = n
        self.bits = bits
        super().__init__(f"precision loss at n={n} ({bits} working bits): {detail}")


class QuadratureError(FindiffError):
    """Level refinement did not converge before the level cap."""

    def __init__(self, n: int, levels: int, detail: str):
        self.n = n
        self.levels = levels
        super().__init__(f"quadrature for n={n} failed after {levels} levels: {detail}")


class TruncationError(FindiffError):
    """The requested truncation tolerance is unreachable within the horizon cap."""

    def __init__(self, horizon: int, detail: str):
        self.horizon = horizon
        super().__init__(f"truncation failed at horizon t={horizon}: {detail}")
