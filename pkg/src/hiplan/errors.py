"""Exception types shared across the toolkit."""


class HiplanError(Exception):
    """Base class for all toolkit errors."""


class ParseError(HiplanError):
    """Malformed task file or program text."""


class ValidationError(HiplanError):
    """Structurally well-formed input that violates an invariant."""


class CapacityError(HiplanError):
    """A configured size or expansion limit was exceeded."""


class NotSolvedError(HiplanError):
    """An operation required a goal-reaching program but got one that is not."""


class DomainError(HiplanError):
    """A probability query referenced an impossible event."""


class UncalledSubroutineError(HiplanError):
    """A nonempty subroutine is never reached from the entry subroutine."""


class StructureError(HiplanError):
    """A call targets an empty or undefined subroutine body."""


class BudgetError(HiplanError):
    """Generative sampling exceeded its size cap."""


class EmptyCorpusError(HiplanError):
    """A posterior was requested over an empty corpus."""


class MissingProgramError(HiplanError):
    """An observed program is absent from the (unioned) corpus."""


class SupportMismatchError(HiplanError):
    """Two distributions do not share a common support."""


class OptimizationError(HiplanError):
    """Every fitting restart failed to produce a finite objective."""
