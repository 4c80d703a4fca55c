"""Exception and warning types shared across the package."""


class DomainError(ValueError):
    """Input outside the domain of a numerical routine (non-finite values, empty lists)."""


class DividedDifferenceError(ArithmeticError):
    """Extended-precision escalation failed to reach the requested accuracy."""


class ValidationError(ValueError):
    """A matrix or Hamiltonian violates a structural requirement (Hermiticity, unitarity, ...)."""


class ClosureError(ValueError):
    """A configuration's operator sequence does not return to its starting state."""


class CapacityError(ValueError):
    """A model exceeds the dimension caps of the exact / enumeration back ends."""


class UndefinedSignError(ZeroDivisionError):
    """The absolute-weight sum vanished, so the average sign is undefined."""


class TruncationWarning(UserWarning):
    """The series tail criterion was not met before the hard order cap."""


class SignCollapseWarning(UserWarning):
    """The sampled average sign is statistically indistinguishable from zero."""


class CapHitWarning(UserWarning):
    """The sampler rejected too many moves because of the expansion-order cap."""
