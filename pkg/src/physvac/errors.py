"""Exception hierarchy shared by all modules."""


class PhysvacError(Exception):
    """Base class for every error raised by the package."""


class ContractError(PhysvacError, ValueError):
    """An input violates a documented precondition (shape, symmetry, ...)."""


class DegenerateMapError(PhysvacError):
    """The flow map has a nonpositive Jacobian somewhere."""

    def __init__(self, index, J):
        self.index = tuple(int(i) for i in index)
        self.J = float(J)
        super().__init__(f"nonpositive Jacobian J={self.J:.6g} at node {self.index}")


class InvalidExponentError(PhysvacError, ValueError):
    """Adiabatic exponent gamma must exceed 1."""


class InvalidDensityError(PhysvacError, ValueError):
    """Initial density must be positive at every (interior) node."""


class ResolutionError(PhysvacError, ValueError):
    """Requested derivative order exceeds what the grid can support."""


class DegenerateTestFunctionError(PhysvacError, ValueError):
    """A Hardy ratio was requested for a function with vanishing denominator."""


class SolverFailure(PhysvacError):
    """Iterative solve did not reach tolerance."""

    def __init__(self, message, residual, iterations):
        self.residual = float(residual)
        self.iterations = int(iterations)
        super().__init__(f"{message} (relative residual {self.residual:.3e} after {self.iterations} iterations)")


class ConfigurationError(PhysvacError, ValueError):
    """A configuration value is invalid; ``key`` names the offending entry."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class GuardrailBreach(PhysvacError):
    """The flow left the admissible region ||A - I|| <= adev_max, j_lo <= J <= j_hi."""

    def __init__(self, t, quantity, value, index):
        self.t = float(t)
        self.quantity = quantity
        self.value = float(value)
        self.index = tuple(int(i) for i in index)
        super().__init__(
            f"guardrail breach at t={self.t:.6g}: {quantity}={self.value:.6g} at node {self.index}"
        )


class SchemaError(PhysvacError, ValueError):
    """A serialized artifact does not match its declared layout."""
