class LabError(Exception):
    """Base class for every failure raised by prime-lab."""


class InvalidArgumentError(LabError, ValueError):
    pass


class CapacityError(LabError):
    """A request exceeds the desk-scale bounds (sieve cap, enumeration cutoff, histogram width)."""


class PreconditionError(LabError):
    pass


class DomainError(LabError, ValueError):
    """A mathematical quantity is undefined for the input (e.g. ln ln N <= 0)."""


class RangeError(LabError, IndexError):
    pass


class DecodeError(LabError):
    def __init__(self, message: str, bits: str = ""):
        super().__init__(message)
        self.bits = bits


class IncompleteProgramError(DecodeError):
    """The bitstring ends in the middle of a field."""


class NotAProgramError(DecodeError):
    """Trailing bits after a complete program, or a field value the format forbids."""


class UnsupportedMachineError(LabError):
    pass


class DivergenceError(LabError):
    """Training produced a non-finite loss."""
