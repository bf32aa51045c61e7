"""Exception hierarchy shared by all modules."""


class MelnikovError(Exception):
    """Base class for every error raised by this package."""


# --- model / closed form -------------------------------------------------

class NoPeriodAnnulus(MelnikovError):
    """The unperturbed system has no usable period annulus for these (alpha, eta)."""


class OutOfAnnulusDomain(MelnikovError, ValueError):
    """Initial velocity outside the half-period domain D_i."""


class OutOfAnnulusImage(MelnikovError, ValueError):
    """Half-period value outside the image I_i of tau0."""


class AdmissibilityError(MelnikovError):
    """sigma/2 does not lie in the open image interval of the annulus."""

    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


# --- perturbation parser ---------------------------------------------------

class ParseError(MelnikovError, ValueError):
    def __init__(self, message, offset, expected=()):
        self.offset = offset
        self.expected = frozenset(expected)
        exp = ", ".join(sorted(self.expected))
        detail = f" (expected one of: {exp})" if exp else ""
        super().__init__(f"{message} at offset {offset}{detail}")


class EvalError(MelnikovError, ArithmeticError):
    def __init__(self, message, subexpr=None):
        super().__init__(message if subexpr is None else f"{message}: {subexpr}")
        self.subexpr = subexpr


# --- numerics ----------------------------------------------------------------

class NoSignChange(MelnikovError, ValueError):
    pass


class MaxIterations(MelnikovError):
    pass


class SingularJacobian(MaxIterations):
    """Newton cannot proceed: the scaled Jacobian determinant is ~0."""


class QuadratureFailure(MelnikovError):
    pass


class DegenerateInput(MelnikovError, ValueError):
    pass


# --- simulator ---------------------------------------------------------------

class SimulationError(MelnikovError):
    """Integration failure.  ``segments`` holds whatever was computed before it."""

    def __init__(self, message, segments=None):
        super().__init__(message)
        self.segments = list(segments or [])


class GrazingError(SimulationError):
    pass


class TimeLimitExceeded(SimulationError):
    pass


class RootBracketFailure(MelnikovError):
    pass


class NewtonDivergence(MelnikovError):
    pass
