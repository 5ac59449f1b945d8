"""Exception hierarchy shared by all modules."""


class EigencritError(Exception):
    """Base class for package errors."""


class ArgumentError(EigencritError, ValueError):
    """A caller passed an argument outside the operation's domain."""


class ValidationError(EigencritError, ValueError):
    """Input data failed a structural check (orthonormality, eigenspace membership...)."""


class ConsistencyError(EigencritError):
    """Derived data was computed at a different parameter than the one supplied."""


class NumericalError(EigencritError):
    """A numerical step failed (factorization, decomposition)."""


class InvalidParameterError(NumericalError):
    """The parameter vector does not give an SPD mass matrix."""


class DecompositionError(NumericalError):
    """Birkhoff decomposition could not find a perfect matching."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NoClosedFormError(EigencritError):
    """No analytic reference spectrum is available for the request."""


class MeshFormatError(EigencritError, ValueError):
    """Mesh file or mesh data is invalid.

    The ``code`` attribute distinguishes the failure kind:
    ``malformed_header``, ``malformed_body``, ``non_manifold``,
    ``degenerate_triangle``, ``unlabeled_boundary``, ``bad_arcs``.
    """

    def __init__(self, code, message):
        super().__init__(f"[{code}] {message}")
        self.code = code


class ConfigError(EigencritError, ValueError):
    """Invalid CLI or config-file input; ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
