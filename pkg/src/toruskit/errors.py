"""Exception hierarchy shared by all toruskit modules."""


class ToruskitError(Exception):
    """Base class for all package-specific errors."""


# -- dynamics ---------------------------------------------------------------

class DegenerateConversion(ToruskitError):
    """(b, c) map-parameter conversion is singular (b = 1)."""


class StepLimitExceeded(ToruskitError):
    """The adaptive integrator consumed its step budget for one section."""


class InvalidEta(ToruskitError):
    """Friction coefficient outside (0, 1); relaxation count undefined."""


# -- frequency analysis -----------------------------------------------------

class DomainError(ToruskitError):
    """Argument outside the window function's domain [-1, 1]."""


class NoPeak(ToruskitError):
    """Signal is identically zero; no spectral peak exists."""


class InsufficientData(ToruskitError):
    """Not enough orbit samples to build the requested signal."""


# -- series algebra ---------------------------------------------------------

class ContextMismatch(ToruskitError):
    """Operands built over different series contexts."""


class IndexOutOfRange(ToruskitError):
    """Action or angle index outside the context's dimensions."""


class NonAdmissibleGenerator(ToruskitError):
    """Generating function is neither angle-only nor action-linear."""


# -- explorer ---------------------------------------------------------------

class InsufficientSamples(ToruskitError):
    """Too few frequency-map samples around the target crossing."""


class BracketInvalid(ToruskitError):
    """The epsilon bracket does not enclose a persists/broken transition."""


class BudgetExceeded(ToruskitError):
    """Probe or refinement budget exhausted before convergence."""


class FlatDerivative(ToruskitError):
    """Finite difference of the frequency map too small for a Newton step."""


class MaxIterExceeded(ToruskitError):
    """Newton iteration did not meet its stop rule within max_iter."""


# -- normal form ------------------------------------------------------------

class SmallDivisor(ToruskitError):
    """A homological divisor fell below the safety floor."""

    def __init__(self, k, value):
        self.k = tuple(int(x) for x in k)
        self.value = complex(value)
        super().__init__(f"divisor {value:.3e} below floor at harmonic {self.k}")


class DegenerateTwist(ToruskitError):
    """det C of the quadratic action part is numerically zero."""


class NotQuadratic(ToruskitError):
    """Remainder bound requires a Hamiltonian that is exactly quadratic."""
