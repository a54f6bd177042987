"""CV-MDI-QKD with photon-varied two-mode squeezed coherent states.

Five building blocks:

* specialfn    — two-variable Hermite sums, log-factorial ratios, TaylorJets
* state_engine — closed-form P^(m,n), moments and covariance of the source
* fock_oracle  — brute-force truncated-Fock reference implementation
* keyrate      — channel/noise model, mutual information, Holevo bound, K
* cli_scan     — sweeps, contour grids, validation runs and the `cvmdi` CLI
"""

from .errors import (
    ConvergenceError,
    CvmdiError,
    DegenerateStateError,
    InternalConsistencyError,
    NumericalDomainError,
    ParameterError,
    PhysicalityError,
    ProgramError,
)
from .keyrate import ChannelParams, KeyRateBreakdown, NoiseBreakdown
from .state_engine import QuadCovariance, StateSpec

__version__ = "0.1.0"

__all__ = [
    "ChannelParams",
    "ConvergenceError",
    "CvmdiError",
    "DegenerateStateError",
    "InternalConsistencyError",
    "KeyRateBreakdown",
    "NoiseBreakdown",
    "NumericalDomainError",
    "ParameterError",
    "PhysicalityError",
    "ProgramError",
    "QuadCovariance",
    "StateSpec",
    "__version__",
]
