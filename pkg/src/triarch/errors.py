"""Exception types shared across the package.

Every error raised for bad input derives from :class:`ValidationError`; the
CLI maps it to exit code 2.  :class:`NumericalBlowup` maps to exit code 4.
"""


class TriarchError(Exception):
    """Base class for all package errors."""


class ValidationError(TriarchError, ValueError):
    """Input violates a data-model invariant."""

    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class DuplicateNodeId(ValidationError):
    pass


class DanglingEdge(ValidationError):
    def __init__(self, source, target, row=None):
        self.source = source
        self.target = target
        super().__init__(f"edge {source!r}->{target!r} references an unknown node", row)


class SelfLoop(ValidationError):
    def __init__(self, node_id, row=None):
        self.node_id = node_id
        super().__init__(f"self-loop on {node_id!r}", row)


class MissingHeader(ValidationError):
    pass


class BadStance(ValidationError):
    pass


class BadCoordinate(ValidationError):
    pass


class BadValue(ValidationError):
    pass


class BadTimestamp(ValidationError):
    pass


class LabelClash(ValidationError):
    pass


class UndefinedMatrix(ValidationError):
    pass


class EmptyMix(ValidationError):
    pass


class DegenerateMarginal(ValidationError):
    pass


class StepNotRecorded(ValidationError):
    pass


class NumericalBlowup(TriarchError, ArithmeticError):
    """A layout position became non-finite."""


class ValidationWarning(UserWarning):
    """Suspicious but loadable input (e.g. a neutral page with no subcategory)."""


# load_nodes reports duplicates under this name
DuplicateId = DuplicateNodeId
