"""Exception types shared across the package."""


class GibbsGroundError(Exception):
    """Base class for all package-specific errors."""


class SizeCapError(GibbsGroundError):
    """A requested system size exceeds a configured cap."""


class ConstraintError(GibbsGroundError):
    """A coupling table or potential violates a structural constraint."""


class UnsupportedModelError(GibbsGroundError):
    """An operation was asked for a model shape it does not cover."""


class InternalConsistencyError(GibbsGroundError):
    """Two independent assemblies of the same object disagree."""


class NonHermitianError(GibbsGroundError):
    """An operation requiring a Hermitian matrix received a non-Hermitian one."""


class ConvergenceError(GibbsGroundError):
    """An iterative solver did not converge within its iteration budget."""


class ConfigError(GibbsGroundError):
    """A run configuration document is malformed or semantically invalid."""
