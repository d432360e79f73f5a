"""Exception hierarchy shared across the package.

Domain errors on plain bad arguments (p < 1, malformed shapes of builtin
types) raise ValueError; everything with artifact-specific semantics gets a
class here so callers can tell structural problems from numerical ones.
"""


class NcError(Exception):
    """Base class for all package-specific errors."""


class StructuralError(NcError):
    """Input violates a structural precondition (shape, hermiticity, kind)."""


class NumericError(NcError):
    """Numerical breakdown: non-finite entries, failed decomposition."""


class BudgetError(NcError):
    """Requested lattice work exceeds the configured budget."""


class ConfigError(NcError):
    """Scenario configuration is inconsistent or incomplete."""


class IntegrityError(NcError):
    """Declared metadata contradicts computed values (e.g. weight bounds)."""


class UnsupportedError(NcError):
    """Requested combination is outside the supported surface."""
