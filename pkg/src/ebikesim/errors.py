"""Exception hierarchy shared by all modules."""


class EbikeSimError(Exception):
    """Base class for every error raised by this package."""


class NoHistoryError(EbikeSimError):
    """No recorded route contains the conditioning segment."""


class StepSizeError(EbikeSimError):
    """Integration step violates the stability bound."""


class InfeasibleTargetsError(EbikeSimError):
    """Calibration targets cannot be met simultaneously."""


class ScenarioError(EbikeSimError):
    """Scenario file failed to parse or validate.

    ``line`` is the 1-based line number when the problem is tied to one.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class DanglingSegmentError(ScenarioError):
    """A section references a segment that is not in the segment graph."""
