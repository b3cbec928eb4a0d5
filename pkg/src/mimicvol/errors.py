"""Exception types shared across the package.

Two families matter operationally: *domain/config* problems (caller handed us
something invalid) and *numerical* problems (the math refused to converge or
an estimator ran out of mass).  The CLI maps the former to exit code 1 and
keeps exit code 2 for honest numerical-check failures.
"""


class MimicvolError(Exception):
    """Base class for all package-specific errors."""


class DomainError(MimicvolError, ValueError):
    """An argument is outside the mathematical or validated domain."""


class ConfigError(MimicvolError, ValueError):
    """A run configuration failed validation (bad key, bad range, bad file)."""


class ConvergenceError(MimicvolError):
    """A series or iterative scheme hit its budget before reaching tolerance."""


class LowMassError(MimicvolError):
    """A conditional estimator found too little local sample mass (n_eff < 30)."""


class UnsupportedBranchError(MimicvolError):
    """A closed-form branch does not exist for these inputs (use the MC route)."""


class DegenerateDensityError(MimicvolError):
    """A price surface is too flat/non-convex in strike to extract a density."""
