"""Exception taxonomy shared by all modules.

The CLI maps these onto exit codes: validation-type failures exit 1,
I/O failures exit 2, internal invariant violations exit 3.
"""


class AvparseError(Exception):
    """Base class for all package errors."""


class ShapeError(AvparseError):
    """Tensor or array arguments have inconsistent shapes."""


class ConfigError(AvparseError):
    """Invalid configuration value or argument."""


class ValidationError(AvparseError):
    """Data file failed validation against its format contract."""


class ContractError(AvparseError):
    """API misuse or violated internal invariant."""
