"""Exception hierarchy shared by the optimizers, the codec and the CLI."""


class RevStegoError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(RevStegoError, ValueError):
    pass


class Infeasible(RevStegoError):
    """No coding within the quota reaches the requested payload."""


class SearchSpaceTooLarge(RevStegoError):
    pass


class FractionalBlock(RevStegoError):
    """A one-hot block of a solver assignment is not near a 0/1 vertex."""


class CapacityExceeded(RevStegoError):
    pass


class NonEmptyReservedBins(RevStegoError):
    """Cover errors occupy magnitudes the coding needs for stego values."""


class CorruptStream(RevStegoError):
    pass


class EmbeddingOverflow(RevStegoError):
    """A modulated intensity would leave the 8-bit range."""


class PGMFormatError(RevStegoError, ValueError):
    pass
