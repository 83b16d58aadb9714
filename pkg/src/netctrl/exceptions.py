"""Exception types raised by netctrl."""


class NetCtrlError(Exception):
    """Base class for all netctrl errors."""


class InvalidSystem(NetCtrlError, ValueError):
    """A network system violates one of its construction invariants."""


class SingularDynamics(InvalidSystem):
    """The dynamics matrix is numerically singular."""


class DegenerateEnsemble(NetCtrlError):
    """A random graph generator could not produce a well-posed draw."""


class NotStabilizable(NetCtrlError):
    """(A, B_S) has an unstable or marginal mode that no actuator reaches.

    The optimal infinite-horizon cost is unbounded for such subsets.
    """


class NoConvergence(NetCtrlError):
    """An iterative solver stopped before reaching its tolerance.

    The last iterate is kept on ``solution`` so callers can still use it.
    """

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class Unstable(NetCtrlError):
    """The operation needs a Schur stable matrix."""


class NotUnstable(NetCtrlError):
    """The operation needs a Schur unstable matrix."""


class NotSymmetric(NetCtrlError):
    """The operation needs a symmetric dynamics matrix."""


class Defective(NetCtrlError):
    """The dynamics matrix is not (numerically) diagonalizable."""


class DomainError(NetCtrlError, ValueError):
    """A scalar parameter lies outside its admissible interval."""


class QNotPositiveDefinite(NetCtrlError):
    """The state cost must be positive definite for this bound."""


class InfeasibleAtK(NetCtrlError):
    """No subset of the requested size stabilizes the system."""


class AllInfeasible(InfeasibleAtK):
    """Exhaustive enumeration found no stabilizing subset."""


class TooLarge(NetCtrlError):
    """The requested enumeration or batch problem exceeds its size cap."""


class EmptyInput(NetCtrlError, ValueError):
    """A summary statistic was requested for an empty sample."""
