"""Exception hierarchy shared by all modules."""


class GalaError(Exception):
    """Base class for every error raised by this package."""


class MeshError(GalaError, ValueError):
    """Invalid or unsupported input mesh."""


class GalaFormatError(GalaError, ValueError):
    """Malformed, truncated or incompatible ``.gala`` file."""


class NumericalError(GalaError, ArithmeticError):
    """A numerical procedure produced non-finite values."""
