"""Exception types shared across the package."""


class WindingLabError(Exception):
    """Base class for all package errors."""


class Breakdown(WindingLabError):
    """The bilinear Stieltjes recursion hit a (near-)zero norm."""

    def __init__(self, degree, message=None):
        self.degree = degree
        super().__init__(message or f"orthogonal polynomial breakdown at degree {degree}")


class NonConvergence(WindingLabError):
    """An adaptive quadrature failed to stabilise."""


class NearPole(WindingLabError):
    """Evaluation point too close to a lattice node."""


class BandPoint(WindingLabError):
    """Evaluation point lies on the branch cut [a, b]."""


class OutOfBand(WindingLabError):
    """Abscissa outside the support of the semicircle law."""


class OutsideDisk(WindingLabError):
    """Point outside the local disk around the critical point."""


class NearBandEdge(WindingLabError):
    """Point in the Airy region near a band endpoint."""


class RegionAmbiguous(WindingLabError):
    """Point falls in a margin between two asymptotic regions."""


class NotInWindow(WindingLabError):
    """Drift lies below the first Hermite window."""


class OutOfRegime(WindingLabError):
    """Parameters outside the regime where a formula applies."""


class RejectionBudgetExceeded(WindingLabError):
    """The rejection sampler used up its proposal budget."""
