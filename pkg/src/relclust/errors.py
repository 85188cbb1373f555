"""Exception hierarchy shared by all relclust modules."""


class RelClustError(Exception):
    """Base class for every error raised by relclust."""


class NotAcyclic(RelClustError):
    """The join query admits no join tree (GYO reduction stalled)."""


class CountOverflow(RelClustError):
    """A join count does not fit in an unsigned 64-bit integer."""


class EmptyJoin(RelClustError):
    """The join result is empty, so there is nothing to cluster."""


class EmptyRegion(RelClustError):
    """Samples were requested from a rectangle holding no join result."""


class DegenerateScale(RelClustError):
    """An exponential grid was requested with a zero length scale."""


class BudgetExceeded(RelClustError):
    """Brute-force materialization would exceed the configured budget."""


class BagTooLarge(BudgetExceeded):
    """A GHD bag join exceeds the materialization budget."""


class GHDViolation(RelClustError):
    """A generalized hypertree decomposition fails coverage or connectivity."""


class SolverFailure(RelClustError):
    """The plug-in clustering solver could not produce centers."""


class SchemaMismatch(RelClustError):
    """Relation columns disagree with the declared schema."""


class ParseError(RelClustError):
    """Input file could not be parsed; message carries file and line."""
