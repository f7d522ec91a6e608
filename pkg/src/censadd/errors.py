"""Exception types shared across the estimation pipeline."""


class EstimationError(Exception):
    """Base class for all censadd-specific failures."""


class UnknownFamily(EstimationError):
    """Requested kernel family is not one of the built-in families."""


class OrderInfeasible(EstimationError):
    """Kernel orders violate the feasibility constraints."""


class GridTooCoarse(EstimationError):
    """A refinement check moved the result beyond the allowed tolerance."""


class CensoringDegenerate(EstimationError):
    """Weighting would divide by a zero censoring-survival value.

    Carries the indices of the offending observations.
    """

    def __init__(self, indices, message=None):
        self.indices = tuple(int(i) for i in indices)
        if message is None:
            message = (
                "censoring survival estimate is zero at uncensored observations "
                f"{list(self.indices)} with nonzero transformed response"
            )
        super().__init__(message)


class DensityFloorHit(EstimationError):
    """Density estimate fell below the positivity floor at contributing points.

    Carries the indices of the offending sample points.
    """

    def __init__(self, indices, message=None):
        self.indices = tuple(int(i) for i in indices)
        if message is None:
            message = (
                "density estimate below floor at contributing sample indices "
                f"{list(self.indices)}"
            )
        super().__init__(message)


class AxisOutOfRange(EstimationError):
    """Requested component axis does not exist for this dimension."""


class NonpositiveVariance(EstimationError):
    """Scaling constant for the standardized statistic is not positive."""


class InfeasibleExponent(EstimationError):
    """Requested smoothing-rate exponent lies outside the feasible band."""


class AssumptionViolated(EstimationError):
    """A hard, machine-checkable model assumption failed.

    ``clause`` names the failing condition.
    """

    def __init__(self, clause, message):
        self.clause = clause
        super().__init__(f"{clause}: {message}")
