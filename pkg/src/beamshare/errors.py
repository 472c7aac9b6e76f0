"""Exception hierarchy shared by every module of the simulator."""


class BeamshareError(Exception):
    """Base class for all simulator errors."""


class DimensionMismatch(BeamshareError, ValueError):
    pass


class SingularMatrix(BeamshareError, ArithmeticError):
    """A Gram matrix lost positive definiteness (rank-deficient channel)."""


class InsufficientAntennas(BeamshareError, ValueError):
    pass


class InsufficientDoF(BeamshareError, ValueError):
    """Too few transmit antennas for the number of constrained users."""


class InvalidGeometry(BeamshareError, ValueError):
    pass


class InvalidParameter(BeamshareError, ValueError):
    pass


class InvalidCsi(BeamshareError, ValueError):
    pass


class NoSamples(BeamshareError, ValueError):
    pass


class Inconsistent(BeamshareError, ValueError):
    pass


class NotTransmitting(BeamshareError, ValueError):
    pass


class Undefined(BeamshareError, ArithmeticError):
    pass


class ConfigError(BeamshareError, ValueError):
    """Configuration problem; ``field`` names the offending dotted key."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class SimulationError(BeamshareError, RuntimeError):
    """Wraps an error raised inside the slot loop with its slot and phase."""

    def __init__(self, slot, phase, cause):
        self.slot = slot
        self.phase = phase
        super().__init__(f"slot {slot}, phase '{phase}': {cause}")
