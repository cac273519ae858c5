"""Exception types shared across the library."""

from __future__ import annotations


class AdleError(Exception):
    """Base class for all errors raised by this package."""


class NotPositiveDefinite(AdleError):
    """A noise covariance matrix is not symmetric positive definite."""

    def __init__(self, agent: int, min_eigenvalue: float, reason: str = ""):
        self.agent = agent
        self.min_eigenvalue = min_eigenvalue
        detail = f" ({reason})" if reason else ""
        super().__init__(
            f"noise covariance of agent {agent} is not positive definite: "
            f"smallest eigenvalue {min_eigenvalue:.6g}{detail}"
        )


class NotGloballyObservable(AdleError):
    """The pooled observation model has a singular normalized Grammian."""

    def __init__(self, min_eigenvalue: float, max_eigenvalue: float):
        self.min_eigenvalue = min_eigenvalue
        self.max_eigenvalue = max_eigenvalue
        super().__init__(
            "observation model is not globally observable: normalized Grammian "
            f"has smallest eigenvalue {min_eigenvalue:.6g} "
            f"(largest {max_eigenvalue:.6g})"
        )


class NotMeanConnected(AdleError):
    """The mean Laplacian of a random topology has no spectral gap."""

    def __init__(self, fiedler: float):
        self.fiedler = fiedler
        super().__init__(
            f"topology is not connected on average: lambda_2 of the mean "
            f"Laplacian is {fiedler:.6g}"
        )


class ScheduleViolation(AdleError):
    """One or more weight-sequence constraints are violated.

    ``violations`` lists ``(description, slack)`` pairs; a negative slack
    quantifies by how much the corresponding inequality fails.
    """

    def __init__(self, violations: list[tuple[str, float]]):
        self.violations = violations
        lines = "; ".join(f"{desc} (slack {slack:.6g})" for desc, slack in violations)
        super().__init__(f"invalid weight schedule: {lines}")


class InvalidExponent(AdleError):
    """Exponent or coefficient outside the admissible range of a recursion."""


class ParseError(AdleError):
    """A scenario file could not be read or parsed."""

    def __init__(self, message: str, path: str = "", line: int | None = None):
        self.path = path
        self.line = line
        where = path if line is None else f"{path}:{line}"
        super().__init__(f"{where}: {message}" if where else message)


class ValidationError(AdleError):
    """A parsed scenario failed validation; collects every failure found."""

    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__(
            "invalid scenario configuration:\n" + "\n".join(f"  - {e}" for e in errors)
        )
