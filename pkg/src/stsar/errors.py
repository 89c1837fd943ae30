class InfeasibleError(ValueError):
    """Parameters outside the region where S_n(theta) is usable.

    Raised for singular S_n, a non-positive determinant, or a violated
    compactness margin. The optimiser treats it as "reject this step".
    """


class EstimationError(RuntimeError):
    """The whitened design is rank deficient or the information is not PD."""


class DegenerateLikelihoodError(EstimationError):
    """sigma2_hat is numerically zero, so the profile likelihood is unbounded."""
