"""Exception types shared across the package."""

from __future__ import annotations


class CutDarcyError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(CutDarcyError, ValueError):
    """A caller-supplied argument violates a precondition."""


class ResolveInterfaceError(CutDarcyError):
    """The interface cannot be resolved on this mesh (element crossed twice).

    Refining the mesh removes the condition.
    """


class UnreachableElementError(CutDarcyError):
    """A small element has no face path to any large element (delta too big)."""


class SingularSystemError(CutDarcyError):
    """Direct factorization hit a numerically zero pivot."""


class TooLargeError(CutDarcyError):
    """Matrix dimension exceeds the configured dense-decomposition limit."""


class InvalidPreconditionerError(CutDarcyError):
    """Preconditioner diagonal has a non-positive entry."""
