"""Exception hierarchy shared across the package."""


class SSFError(Exception):
    """Base class for all errors raised by ssfkymo."""


class FormatError(SSFError):
    """Malformed file header or metadata descriptor."""


class SizeError(SSFError, ValueError):
    """Array extents disagree with a payload or a kernel support."""


class DomainError(SSFError, ValueError):
    """An argument lies outside its mathematical domain."""


class ResolutionError(DomainError):
    """Requested blob radius is below one voxel."""


class ConfigurationError(SSFError, ValueError):
    pass


class EmptySignalError(SSFError, ValueError):
    pass


class DegenerateSpreadError(SSFError, ValueError):
    pass


class DegenerateSpreadWarning(UserWarning):
    pass


class ShapeError(SSFError, ValueError):
    pass


class CompressorError(SSFError, RuntimeError):
    """An external or built-in compressor failed on some input."""


class MissingProgramError(SSFError, OSError):
    """A required external program is unavailable."""


class BudgetError(SSFError, RuntimeError):
    pass


class PartitionError(SSFError, ValueError):
    pass


class SymmetryError(SSFError, ValueError):
    pass


class ReducedRankWarning(UserWarning):
    pass


class UndefinedTestError(SSFError, ValueError):
    """A statistic is undefined for the supplied sample."""


class AlignmentError(SSFError, ValueError):
    pass


class UndefinedVelocityError(SSFError, ValueError):
    pass


class StageError(SSFError, RuntimeError):
    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
