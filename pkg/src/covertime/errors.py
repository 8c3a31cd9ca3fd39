"""Exception types raised by the solvers and generators."""


class CoverTimeError(Exception):
    """Base class for all errors raised by this package."""


class RowSumError(CoverTimeError, ValueError):
    """A transition row does not sum to one."""

    def __init__(self, state, action, total):
        self.state = state
        self.action = action
        self.total = total
        self.excess = total - 1.0
        super().__init__(
            f"row (s={state}, a={action}) sums to {total!r} (excess {self.excess:+.3g})"
        )


class StateIndexError(CoverTimeError, IndexError):
    """A state or action index lies outside the declared range."""


class SingularSystemError(CoverTimeError, ArithmeticError):
    pass


class InfiniteCoverTime(CoverTimeError):
    """The expected cover time from the requested product state is infinite."""


class AssumptionViolated(CoverTimeError):
    """No stationary policy induces an irreducible chain on the MDP."""


class CapExceeded(CoverTimeError):
    """A size cap guarding an exponential computation was exceeded."""


class NonConvergence(CoverTimeError):
    pass


class StepCapExceeded(CoverTimeError):
    pass


class EmptyPart(CoverTimeError, ValueError):
    pass


class SingletonTransfer(CoverTimeError, ValueError):
    pass


class TooManyAgents(CoverTimeError, ValueError):
    pass


class ConstructionFailed(CoverTimeError):
    """A generator could not realize the requested instance parameters."""
