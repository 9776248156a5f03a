"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid physical configuration or run specification."""


class NumericalError(ArithmeticError):
    """Base class for failures of the numerical routines."""


class PoleOnAxisError(NumericalError):
    """The resolvent is singular (or nearly so) on the real-frequency axis."""

    def __init__(self, eigenvalue, condition):
        self.eigenvalue = eigenvalue
        self.condition = condition
        super().__init__(
            f"generator eigenvalue {eigenvalue:.6g} lies on (or too close to) the "
            f"imaginary axis; resolvent condition estimate {condition:.3g}"
        )


class IntegrationError(NumericalError):
    """The adaptive integrator could not continue."""

    def __init__(self, message, t):
        self.t = t
        super().__init__(f"{message} (at t = {t:.6g})")


class InsufficientTailError(NumericalError):
    """A trajectory was not integrated far enough for a Laplace transform."""
