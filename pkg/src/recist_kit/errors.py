"""Exception hierarchy shared by every recist_kit module."""


class RecistKitError(Exception):
    """Base class for all errors raised by recist_kit."""


class InvalidRecist(RecistKitError, ValueError):
    """A RECIST annotation cannot be turned into a pseudo mask."""


class ZeroLengthDiameter(InvalidRecist):
    pass


class ParallelDiameters(InvalidRecist):
    pass


class DegenerateArm(InvalidRecist):
    """An endpoint coincides with the crossing point of the two diameters."""


class BothEmpty(RecistKitError, ValueError):
    """IoU of two masks with no set bits is undefined."""


class MissingMask(RecistKitError, ValueError):
    pass


class NoGroundTruth(RecistKitError, ValueError):
    pass


class PlacementFailure(RecistKitError, RuntimeError):
    pass


class ParseError(RecistKitError, ValueError):
    """Malformed input file; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(f"{where}{message}")


class RleLengthMismatch(ParseError):
    pass
