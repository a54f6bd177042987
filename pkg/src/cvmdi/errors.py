"""Exception taxonomy shared by all modules.

Every error raised on purpose by this package derives from CvmdiError, so
callers (and the CLI) can distinguish our diagnostics from genuine bugs.
"""


class CvmdiError(Exception):
    """Base class for all package-level errors."""


class ParameterError(CvmdiError):
    """Inputs outside the documented domain (bad tau, V_A <= 1, eta = 0, ...)."""


class NumericalDomainError(CvmdiError):
    """A closed-form evaluation produced NaN/Inf; carries context for diagnosis."""

    def __init__(self, message, context=None):
        super().__init__(message)
        self.context = dict(context or {})


class DegenerateStateError(CvmdiError):
    """Success probability underflowed; conditional moments are undefined."""


class PhysicalityError(CvmdiError):
    """A covariance matrix violated Sigma + i*Omega >= 0 beyond tolerance."""


class InternalConsistencyError(CvmdiError):
    """Two supposedly equivalent internal computations disagreed.

    Raised when a cross-check (e.g. symplectic spectra via two routes, or the
    x-p cross covariance that must vanish by symmetry) fails: this signals a
    transcription bug rather than a bad user input.
    """


class ConvergenceError(CvmdiError):
    """Truncated-Fock result did not converge at the requested cutoff."""


class ProgramError(CvmdiError):
    """A jet program used a primitive outside the supported closed set."""
