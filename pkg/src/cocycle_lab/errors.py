"""Exception types raised across the package."""


class CocycleLabError(Exception):
    """Base class for every error raised by cocycle_lab."""


class ConfigError(CocycleLabError):
    pass


class NotRecurrent(CocycleLabError):
    """The orbit segment does not return close enough to be shadowed."""


class SingularLattice(CocycleLabError):
    pass


class EnumerationBudgetExceeded(CocycleLabError):
    pass


class LeafRadiusExceeded(CocycleLabError):
    pass


class PointsTooFar(CocycleLabError):
    pass


class IllConditioned(CocycleLabError):
    pass


class BudgetExceeded(CocycleLabError):
    pass


class TailNotCertified(CocycleLabError):
    """The truncated Lyapunov series could not be given a tail bound."""


class ZeroExponentCheckFailed(CocycleLabError):
    pass


class NoReturnsFound(CocycleLabError):
    pass


class NoNeighbor(CocycleLabError):
    pass


class NotOnLeaf(CocycleLabError):
    pass


class NotConverged(CocycleLabError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = list(residuals or [])


class InsufficientPairs(CocycleLabError):
    pass
