"""
Errors
======
Exception hierarchy for permin.

Every error carries structured fields, serializes through ``to_dict()`` and
declares the process exit code the CLI uses for it:

- 2  configuration / validation problems (bad input, caps, kind mismatches)
- 3  verification failures (a certificate or minimizer check did not pass)
- 1  internal failures (a stored constant was violated, an iteration diverged)
"""

from fractions import Fraction
from typing import Any, Dict, List, Optional


def _plain(value: Any) -> Any:
    """Make error fields JSON friendly (rationals as "p/q")."""
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, float) and value == float("inf"):
        return "inf"
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    return value


class PerminError(Exception):
    """Base class for all permin errors."""

    exit_code = 1

    def __init__(self, message: str, **fields: Any):
        super().__init__(message)
        self.message = message
        self.fields = fields

    def to_dict(self) -> Dict[str, Any]:
        return {
            "error": type(self).__name__,
            "message": self.message,
            **{k: _plain(v) for k, v in self.fields.items()},
        }


# =============================================================================
# VALIDATION (exit 2)
# =============================================================================

class ValidationError(PerminError):
    """Input rejected before any computation."""

    exit_code = 2


class ConfigError(ValidationError):
    """Experiment configuration is malformed or incomplete."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}", field=field)


class KindMismatchError(ValidationError):
    """A point or observable does not belong to the system it was used with."""

    def __init__(self, expected: str, got: str):
        super().__init__(f"expected {expected}, got {got}", expected=expected, got=got)


class InadmissibleWordError(ValidationError):
    """A symbolic word violates the transition matrix."""

    def __init__(self, word: List[int], message: str = "word is not admissible"):
        super().__init__(message, word=list(word))


class PseudoOrbitError(ValidationError):
    """A cyclic jump of a pseudo-orbit exceeds eta."""

    def __init__(self, index: int, jump: Any, eta: Any):
        super().__init__(
            f"jump at index {index} is {jump} > eta = {eta}",
            index=index, jump=jump, eta=eta,
        )


class EnumerationCapError(ValidationError):
    """Requested enumeration depth exceeds the configured cap."""

    def __init__(self, requested: int, cap: int):
        super().__init__(
            f"period bound {requested} exceeds enumeration cap {cap}",
            requested=requested, cap=cap,
        )


class ObservableError(ValidationError):
    """Observable is incompatible with the system or malformed."""


class AspPreconditionError(ValidationError):
    """Orbit segments separate by more than delta, so ASP(1) does not apply."""

    def __init__(self, index: int, distance: Any, delta: Any):
        super().__init__(
            f"d(T^{index}x, T^{index}y) = {distance} exceeds delta = {delta}",
            index=index, distance=distance, delta=delta,
        )


class BudgetViolationError(ValidationError):
    """A perturbation h lies outside the admissible ball."""

    def __init__(self, cap: str, value: Any, limit: Any):
        super().__init__(
            f"{cap}: {value} is not below {limit}", cap=cap, value=value, limit=limit
        )


class SeedTooSmallError(ValidationError):
    """No (n, k) within the escalation ladder satisfies the feasibility inequalities."""

    def __init__(self, n: int, k: int, lhs: float, rhs: float):
        super().__init__(
            f"feasibility fails at n={n}, k={k}: {lhs:.6g} >= {rhs:.6g}",
            n=n, k=k, lhs=lhs, rhs=rhs,
        )


class OrbitNotGoodEnoughError(ValidationError):
    """Gap-to-deviation ratio of the orbit does not exceed L_hat."""

    def __init__(self, L_O: Any, L_hat: Any):
        deficit = float(L_hat) - float(L_O)
        super().__init__(
            f"L_O = {float(L_O):.6g} does not exceed L_hat = {float(L_hat):.6g}",
            L_O=float(L_O), L_hat=float(L_hat), deficit=deficit,
        )


# =============================================================================
# VERIFICATION (exit 3)
# =============================================================================

class VerificationFailed(PerminError):
    """A certificate or minimizer check failed; details live in the report."""

    exit_code = 3

    def __init__(self, message: str, failures: Optional[List[Dict[str, Any]]] = None):
        super().__init__(message, failures=failures or [])


class CertificateError(VerificationFailed):
    """Sub-action certificate did not pass verification."""


# =============================================================================
# INTERNAL (exit 1)
# =============================================================================

class ShadowingError(PerminError):
    """Shadowing construction failed or violated the stored tracking constant."""


class SubActionError(PerminError):
    """Sub-action construction hit an internal inconsistency."""


class ConvergenceError(PerminError):
    """An iteration did not converge within its budget."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message, residual=residual, iterations=iterations)


class ConstructionError(PerminError):
    """Orbit construction could not proceed."""
