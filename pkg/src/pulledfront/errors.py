"""Exception and warning types raised across the package."""

__all__ = [
    "PulledFrontError", "ModelInvalid", "NoConvergence", "DegenerateDoubleRoot",
    "RootCollision", "NotPinched", "HypothesisViolated", "GridTooCoarse",
    "DoubleRootResidual", "CentralRootAmbiguous", "JordanCollision", "BetaZero",
    "OverflowGuard", "BoundViolated", "WindowUnderflow", "GapFails",
    "NonMonotoneWarning", "GridMismatch", "SingularSystem", "ResidualLarge",
    "TangencyFitFailed", "QuadratureUnconverged", "StepsizeUnderflow",
    "BlowupDetected", "PsiUnavailable", "ConfigInvalid",
]


class PulledFrontError(Exception):
    """Base class for all errors raised by this package."""


class ModelInvalid(PulledFrontError, ValueError):
    """Model coefficients violate a structural requirement."""


class NoConvergence(PulledFrontError):
    """Newton-type iteration did not reach its tolerance."""


class DegenerateDoubleRoot(PulledFrontError):
    """The double root has vanishing curvature coefficient."""


class RootCollision(PulledFrontError):
    """Root continuation lost track of a branch."""


class NotPinched(PulledFrontError):
    """The double root could not be certified as pinched."""


class HypothesisViolated(PulledFrontError):
    """A sampled spectral hypothesis failed.

    The failing clause is stored in ``clause``.
    """

    def __init__(self, clause, message=None, report=None):
        self.clause = clause
        self.report = report
        super().__init__(message or f"hypothesis clause failed: {clause}")


class GridTooCoarse(PulledFrontError, ValueError):
    """Too few grid points for the requested quadrature."""


class DoubleRootResidual(PulledFrontError):
    """Shifted symbol keeps a nonzero constant or linear coefficient."""


class CentralRootAmbiguous(PulledFrontError):
    """The two central spatial roots are not separated from the rest."""


class JordanCollision(PulledFrontError):
    """Spatial roots too close for Frobenius covariants."""


class BetaZero(PulledFrontError):
    """Pole coefficient vanishes."""


class OverflowGuard(PulledFrontError, FloatingPointError):
    """An exponent expected to decay would overflow."""


class BoundViolated(PulledFrontError):
    """A sampled kernel bound grows under refinement.

    The offending estimate is stored in ``lemma``.
    """

    def __init__(self, lemma, message=None):
        self.lemma = lemma
        super().__init__(message or f"bound ratio grows for {lemma}")


class WindowUnderflow(PulledFrontError):
    """Front values in the fit window are below the floating point floor."""


class GapFails(PulledFrontError):
    """Spatial eigenvalue gap condition fails, so psi is unavailable."""


class NonMonotoneWarning(UserWarning):
    """Computed front is not monotone."""


class GridMismatch(PulledFrontError, ValueError):
    """Front and operator grids differ."""


class SingularSystem(PulledFrontError):
    """Linear system is numerically singular."""


class ResidualLarge(PulledFrontError):
    """Linear solve residual exceeds tolerance."""


class TangencyFitFailed(PulledFrontError):
    """Could not build a contour tangent to the border."""


class QuadratureUnconverged(PulledFrontError):
    """Contour quadrature did not converge under node doubling."""


class StepsizeUnderflow(PulledFrontError):
    """Adaptive time step fell below its floor."""


class BlowupDetected(PulledFrontError):
    """Perturbation norm grew beyond the blowup threshold."""


class PsiUnavailable(PulledFrontError):
    """No linearly growing kernel element is available."""


class ConfigInvalid(PulledFrontError, ValueError):
    """Run configuration failed validation."""
