"""Maximally monotone operators seen through their resolvents, and Yosida calculus."""
import logging
from abc import ABC, abstractmethod
from typing import NamedTuple

import numpy as np

from ..config import get_settings, Settings
from ..errors import InvalidParameterError, MissingZeroError, NonFiniteError
from .proxcore import ProxObjective, as_point, check_positive, moreau_gradient

logger = logging.getLogger(__name__)


class MonotoneOperator(ABC):
    """A maximally monotone operator; only the resolvent is ever evaluated."""

    dimension: int
    zero: np.ndarray | None = None

    @abstractmethod
    def resolvent(self, lam: float, x: np.ndarray) -> np.ndarray:
        """J_{lam A}(x) = (I + lam A)^{-1} x."""

    def yosida(self, lam: float, x: np.ndarray) -> np.ndarray:
        return (x - self.resolvent(lam, x)) / lam


class SubdifferentialOperator(MonotoneOperator):
    """The subdifferential of a prox objective: resolvents are prox maps."""

    def __init__(self, objective: ProxObjective):
        self.objective = objective
        self.dimension = objective.dimension
        self.zero = objective.minimizer

    def resolvent(self, lam: float, x: np.ndarray) -> np.ndarray:
        return self.objective.prox(lam, x)

    def yosida(self, lam: float, x: np.ndarray) -> np.ndarray:
        # same code path as the envelope gradient, so results match bitwise
        return moreau_gradient(self.objective, lam, x)


class LinearMonotoneOperator(MonotoneOperator):
    """x -> M x with M + M^T positive semidefinite."""

    def __init__(self, matrix, zero=None):
        M = np.asarray(matrix, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise InvalidParameterError(f"operator matrix must be square, got shape {M.shape}")
        sym_min = float(np.min(np.linalg.eigvalsh(M + M.T)))
        if sym_min < -1e-12 * max(1.0, float(np.linalg.norm(M))):
            raise InvalidParameterError(f"M + M^T is not positive semidefinite (min eigenvalue {sym_min:.3e})")
        self.matrix = M
        self.dimension = M.shape[0]
        self.zero = np.zeros(self.dimension) if zero is None else as_point(zero, self.dimension, "zero")

    def resolvent(self, lam: float, x: np.ndarray) -> np.ndarray:
        system = np.eye(self.dimension) + lam * self.matrix
        try:
            return np.linalg.solve(system, x)
        except np.linalg.LinAlgError as e:
            raise NonFiniteError("resolvent", f"singular resolvent system at lambda={lam!r}: {e}") from e


def rotation_operator() -> LinearMonotoneOperator:
    """Skew rotation [[0, -1], [1, 0]]: monotone, not a subdifferential; zero at the origin."""
    return LinearMonotoneOperator([[0.0, -1.0], [1.0, 0.0]])


def identity_operator(dimension: int = 2) -> LinearMonotoneOperator:
    return LinearMonotoneOperator(np.eye(dimension))


def zero_operator(dimension: int = 2) -> LinearMonotoneOperator:
    return LinearMonotoneOperator(np.zeros((dimension, dimension)))


def yosida(A: MonotoneOperator, lam: float, x) -> np.ndarray:
    """A_lam(x) = (x - J_{lam A}(x)) / lam."""
    lam = check_positive(lam, "lambda")
    x = as_point(x, A.dimension)
    return A.yosida(lam, x)


def resolvent_identity_residual(A: MonotoneOperator, alpha: float, beta: float, x) -> float:
    """|J_a(x) - J_b((b/a) x + (1 - b/a) J_a(x))|; zero for exact resolvents."""
    alpha = check_positive(alpha, "alpha")
    beta = check_positive(beta, "beta")
    x = as_point(x, A.dimension)
    j_alpha = A.resolvent(alpha, x)
    ratio = beta / alpha
    shifted = A.resolvent(beta, ratio * x + (1.0 - ratio) * j_alpha)
    return float(np.linalg.norm(j_alpha - shifted))


def yosida_perturbation_margin(A: MonotoneOperator, alpha: float, beta: float, x) -> float:
    """(2|b - a| / a) |A_b(x)| - |A_b(x) - A_a(x)|; nonnegative for maximally monotone A."""
    alpha = check_positive(alpha, "alpha")
    beta = check_positive(beta, "beta")
    x = as_point(x, A.dimension)
    a_beta = A.yosida(beta, x)
    a_alpha = A.yosida(alpha, x)
    bound = 2.0 * abs(beta - alpha) / alpha * float(np.linalg.norm(a_beta))
    return bound - float(np.linalg.norm(a_beta - a_alpha))


def yosida_basic_bound_margin(A: MonotoneOperator, lam: float, x) -> float:
    """|x - x*| / lam - |A_lam(x)| for a known zero x*."""
    if A.zero is None:
        raise MissingZeroError(f"{type(A).__name__} has no known zero")
    lam = check_positive(lam, "lambda")
    x = as_point(x, A.dimension)
    return float(np.linalg.norm(x - A.zero)) / lam - float(np.linalg.norm(A.yosida(lam, x)))


class MajorantCoefficients(NamedTuple):
    m: float
    n: float


def majorant_coefficients(
    a: float,
    b: float,
    c: float,
    epsilon_fraction: float | None = None,
    s: Settings | None = None,
) -> MajorantCoefficients:
    """
    Positive (m, n) with a|x|^2 + b<x,y> + c|y|^2 <= -m|x|^2 - n|y|^2 for all x, y.

    Requires a < 0, c < 0 and a negative discriminant. ``epsilon_fraction`` picks m
    inside the open interval (0, disc / (4c)).
    """
    if epsilon_fraction is None:
        s = s or get_settings()
        epsilon_fraction = s.EPSILON_FRACTION
    if not a < 0:
        raise InvalidParameterError(f"a must be negative, got {a!r}")
    if not c < 0:
        raise InvalidParameterError(f"c must be negative, got {c!r}")
    if not 0 < epsilon_fraction < 1:
        raise InvalidParameterError(f"epsilon_fraction must lie in (0, 1), got {epsilon_fraction!r}")
    disc = b * b - 4.0 * a * c
    if not disc < 0:
        raise InvalidParameterError(f"discriminant b^2 - 4ac must be negative, got {disc!r}")
    m = epsilon_fraction * disc / (4.0 * c)
    n = (disc - 4.0 * m * c) / (4.0 * (m + a))
    return MajorantCoefficients(m, n)
