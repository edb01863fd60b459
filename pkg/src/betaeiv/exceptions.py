"""Exception types raised by the estimation and diagnostic routines."""


class BetaEivError(Exception):
    """Base class for all package-specific errors."""


class DegenerateModelError(BetaEivError):
    """The surrogate distribution has zero variance; the model is degenerate."""


class CalibrationInfeasibleError(BetaEivError):
    """The surrogate sample variance does not exceed the measurement error
    variance, so no positive latent-covariate variance is implied."""


class InfeasibleNuisanceError(BetaEivError):
    """The closed-form nuisance step produced a non-positive variance."""


class RankDeficiencyError(BetaEivError):
    """A weighted cross-product matrix is singular."""

    def __init__(self, message, columns=None):
        super().__init__(message)
        self.columns = tuple(columns) if columns is not None else ()


class EvaluationError(BetaEivError):
    """An objective function returned a non-finite value where a finite one
    was required. ``index`` identifies the coordinate being probed, when
    applicable."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index
