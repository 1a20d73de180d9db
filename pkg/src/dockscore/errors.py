"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage errors -> 1, data errors -> 2,
numeric failures -> 3.
"""


class DockscoreError(Exception):
    """Base class for all package errors."""


class ShapeError(DockscoreError, ValueError):
    """Operands do not conform (shapes, axes, segment counts)."""


class NonFiniteError(DockscoreError, ArithmeticError):
    """A computation produced NaN or Inf from finite inputs."""


class TapeError(DockscoreError, RuntimeError):
    """Misuse of the autodiff tape (non-scalar loss, reused tape)."""


class ParseError(DockscoreError, ValueError):
    """A SMILES string could not be parsed under the supported subset."""


class DataError(DockscoreError, ValueError):
    """Bad dataset file, container, checkpoint, or record."""


class ConfigError(DockscoreError, ValueError):
    """Invalid model or training configuration."""
