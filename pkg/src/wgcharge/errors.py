"""Exception types shared across the package.

Plain ValueError is used for malformed arguments (bad shapes, negative rates,
non-ascending time grids). The classes here mark conditions with physical or
workflow meaning, so callers (and the CLI exit-code mapping) can tell a typo
from a refusal.
"""


class ModelError(Exception):
    """Base class for all domain errors raised by this package."""


class UnsupportedNetworkError(ModelError):
    """Network shape outside the supported two-mode, few-channel family."""


class UnstableSystemError(ModelError):
    """The drift generator has a non-decaying eigenvalue; no steady state."""


class UnphysicalStateError(ModelError):
    """A state or moment set violates physicality beyond tolerance."""


class UndefinedRatioError(ModelError):
    """A ratio metric hit 0/0; the value is undefined, not zero."""


class SingularPointError(ModelError):
    """An analytic reduction was evaluated at a pole of its expression."""


class CutoffConvergenceError(ModelError):
    """The Fock-cutoff ladder exhausted its range without converging."""


class DriveGuardError(ModelError):
    """A drive amplitude outside the validated regime was refused."""


class ConfigError(ModelError):
    """A run configuration could not be parsed or is inconsistent."""
