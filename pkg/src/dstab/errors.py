"""Exception types raised across the toolkit.

Every error that callers are expected to branch on derives from
:class:`DstabError`.  The CLI maps :class:`UsageError` subclasses to exit
code 1, :class:`NumericError` subclasses to exit code 2, and a failed
certificate search to exit code 3.
"""


class DstabError(Exception):
    """Base class for all toolkit errors."""


class UsageError(DstabError):
    """Bad inputs: malformed files, invalid arguments, contract violations."""


class NumericError(DstabError):
    """A numeric routine could not complete (singularity, non-convergence)."""


# ---- input parsing / validation -------------------------------------------

class ParseError(UsageError):
    """A system or certificate file is not valid JSON or misses fields."""


class ValidationError(UsageError):
    """A parsed description violates the system contract."""


class EmptySystem(ValidationError):
    """No delay terms were given."""


class NonPositiveDelay(ValidationError):
    """A delay is zero or negative."""


class NonIncreasingDelays(ValidationError):
    """Delays are not strictly increasing."""


class DimensionMismatch(ValidationError):
    """A matrix or vector has the wrong shape for the declared dimension."""


class OutOfRange(UsageError):
    """A scalar argument lies outside its documented range."""


class NotScalar(UsageError):
    """An operation defined only for scalar (n = 1) systems got n > 1."""


# ---- commensurability / lattice --------------------------------------------

class NotCommensurate(UsageError):
    """The delays are not integer multiples of a common base within tolerance."""


class LatticeExplosion(NumericError):
    """The discontinuity lattice exceeded the enumeration cap."""


# ---- simulation -------------------------------------------------------------

class StepTooLarge(UsageError):
    """The grid step violates h <= r_1 / 10."""


class CausalityViolation(NumericError):
    """A time-varying delay became non-positive on the grid."""


class InvalidProfile(UsageError):
    """A delay perturbation leaves its declared bound on the horizon."""


class DegenerateFit(NumericError):
    """Too few usable samples to fit a decay envelope."""


# ---- linear algebra ----------------------------------------------------------

class EigenFailure(NumericError):
    """The eigenvalue solver did not converge."""


class SpectralRadiusNotLessThanOne(UsageError):
    """A Stein equation was posed for a non-contractive matrix."""


class SingularSystem(NumericError):
    """The vectorized Stein system is numerically singular."""


class NotPositiveDefinite(UsageError):
    """A matrix required to be positive definite is not."""


class InvalidRatio(UsageError):
    """lambda_min(M) >= lambda_max(P), so the decay-rate formula is undefined."""


# ---- certificate search -------------------------------------------------------

class SearchFailure(DstabError):
    """The feasibility search found no verifiable certificate.

    Not a proof of instability.  Carries the best semidefiniteness margin
    the search achieved (``best_margin``) and, when available, a hint from
    the commensurate lifting or the torus test (``diagnostics``).
    """

    def __init__(self, message, best_margin=None, diagnostics=None):
        super().__init__(message)
        self.best_margin = best_margin
        self.diagnostics = diagnostics or {}


# ---- robustness / time-varying ----------------------------------------------

class NoNominalCertificate(UsageError):
    """A perturbation analysis was requested without a usable nominal certificate."""


class NominalNotVerified(UsageError):
    """The supplied (P, mu) pair does not verify on the nominal system."""


class DerivativeBoundTooLarge(UsageError):
    """A delay-derivative bound is not strictly below its admissible cap."""
