"""Exception hierarchy shared by all boxalg modules."""


class BoxalgError(Exception):
    """Base class for all boxalg errors."""


class UnknownOp(BoxalgError):
    pass


class ArityMismatch(BoxalgError):
    pass


class UnassignedVariable(BoxalgError):
    pass


class ResourceLimit(BoxalgError):
    """A configured cap (table count, element count, iterations) was exceeded."""


class SizeMismatch(BoxalgError):
    pass


class NotACongruence(BoxalgError):
    pass


class ClassMismatch(BoxalgError):
    pass


class NotADecomposition(BoxalgError):
    pass


class NotCoordinatized(BoxalgError):
    pass


class NotStronglyAbelian(BoxalgError):
    pass


class EssentiallyUnary(BoxalgError):
    pass


class NonTermination(BoxalgError):
    pass


class EmbeddingFailure(BoxalgError):
    pass


class IsolationFailure(BoxalgError):
    pass


class NotDistinct(BoxalgError):
    pass


class SortMismatch(BoxalgError):
    pass


class ParseError(BoxalgError):
    pass


class NotApplicable(BoxalgError):
    pass
