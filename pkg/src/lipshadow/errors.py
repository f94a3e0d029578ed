"""Exception hierarchy shared by every module."""


class ContractError(ValueError):
    """An argument violates an operation's precondition."""


class InjectivityError(ContractError):
    """A tangent vector is too long for the exponential chart."""


class NonInvertibleError(RuntimeError):
    """Newton inversion of a map did not converge."""


class IsomorphismError(ContractError):
    """A cocycle matrix is (numerically) singular."""


class SmallnessError(ContractError):
    """The defect ``d`` is too large for the requested construction.

    ``d_max`` carries the largest admissible value.
    """

    def __init__(self, message, d_max):
        super().__init__(message)
        self.d_max = d_max
