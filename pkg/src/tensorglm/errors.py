"""Exception hierarchy shared by every module."""

from __future__ import annotations


class TensorGLMError(Exception):
    """Base class of all package errors."""


class InvalidArgumentError(TensorGLMError, ValueError):
    """An argument lies outside the documented domain."""


class NumericDomainError(TensorGLMError, ArithmeticError):
    """A numerical evaluation produced a non-finite value.

    ``node`` carries the offending quadrature node (or argument tuple)
    when one is known.
    """

    def __init__(self, message: str, node=None):
        super().__init__(message)
        self.node = node


class SolverDivergenceError(TensorGLMError, RuntimeError):
    """Every fixed-point start diverged; ``diagnostics`` holds one entry per start."""

    def __init__(self, message: str, diagnostics=None):
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])


class UnsupportedPriorError(TensorGLMError, ValueError):
    """The finite-size oracle needs a prior with finite support."""


class UnsupportedSizeError(TensorGLMError, ValueError):
    """Exact enumeration would be too large."""


class ConfigError(TensorGLMError, ValueError):
    """A run configuration failed schema validation."""


class DerivativeSignWarning(RuntimeWarning):
    """A finite-difference derivative came out with the wrong sign."""


class NearDegenerateWarning(RuntimeWarning):
    """Two competing stationary points are almost tied in potential."""
