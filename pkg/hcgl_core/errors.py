"""
HCGL Core Errors - Exception hierarchy shared by every package.

Each class maps to one CLI exit code (see ``hcgl_cli.common.exit_code_for``).
"""

from typing import Any, Dict, List, Optional


class HcglError(Exception):
    """Base class for all errors raised by hcgl."""


class ConfigError(HcglError):
    """Raised when user-supplied parameters are invalid or inconsistent."""


class EnumerationCapError(ConfigError):
    """Raised when a graph is too large to enumerate its independent sets."""

    def __init__(self, n_vertices: int, cap: int, estimated_states: float):
        self.n_vertices = n_vertices
        self.cap = cap
        self.estimated_states = estimated_states
        super().__init__(
            f"Refusing to enumerate {n_vertices} vertices (cap is {cap}, "
            f"set HCGL_ENUM_CAP to raise it): roughly {estimated_states:.3g} "
            f"independent sets expected"
        )

    def __reduce__(self):
        return (type(self), (self.n_vertices, self.cap, self.estimated_states))


class PreconditionError(HcglError):
    """Raised when an operation is called outside the regime it is defined for."""


class ConditioningError(PreconditionError):
    """Raised when a linear solve would not return trustworthy digits."""


class InstabilityError(PreconditionError):
    """Raised when queue parameters cannot yield a stable network."""

    def __init__(self, message: str, verdict: str, diagnostics: Optional[Dict[str, Any]] = None):
        self.verdict = verdict
        self.diagnostics = diagnostics or {}
        super().__init__(message)

    def __reduce__(self):
        return (type(self), (str(self), self.verdict, self.diagnostics))


class IdentityViolationError(HcglError):
    """Raised when an exhaustive audit finds a configuration breaking an identity."""

    def __init__(self, violations: List[Dict[str, Any]]):
        self.violations = violations
        first = violations[0] if violations else {}
        super().__init__(
            f"{len(violations)} identity violation(s); first: "
            f"{first.get('type', '?')} at state {first.get('state_hex', '?')}"
        )

    def __reduce__(self):
        return (type(self), (self.violations,))


class ConditioningWarning(UserWarning):
    """Issued when a numerical result is close to the limits of float64."""
