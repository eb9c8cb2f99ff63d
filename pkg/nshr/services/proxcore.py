"""Proximal maps, Moreau envelopes and the separable test objectives.

An objective is only ever touched through two oracles: ``value(x)`` and
``prox(gamma, x)``. Envelope values and gradients are derived from them, so
nonsmooth pieces stay exact.
"""
import math
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from ..config import get_settings
from ..errors import BracketError, DimensionError, InvalidParameterError

logger = logging.getLogger(__name__)

_INV_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_MAX_BRACKET_DOUBLINGS = 200
_MAX_GOLDEN_ITERATIONS = 500


def as_point(x, dimension: int | None = None, name: str = "x") -> np.ndarray:
    """Returns ``x`` as a finite 1-D float array, checking its dimension if given."""
    point = np.atleast_1d(np.asarray(x, dtype=float))
    if point.ndim != 1:
        raise DimensionError(f"{name} must be a vector, got shape {point.shape}")
    if dimension is not None and point.shape[0] != dimension:
        raise DimensionError(f"{name} must have dimension {dimension}, got {point.shape[0]}")
    if not np.all(np.isfinite(point)):
        raise InvalidParameterError(f"{name} has non-finite entries: {point}")
    return point


def check_positive(value: float, name: str) -> float:
    value = float(value)
    if not (value > 0.0 and math.isfinite(value)):
        raise InvalidParameterError(f"{name} must be a positive finite number, got {value!r}")
    return value


def soft_threshold(xi, tau):
    """sign(xi) * max(|xi| - tau, 0), elementwise; scalars in, float out."""
    tau_arr = np.asarray(tau, dtype=float)
    if np.any(tau_arr < 0):
        raise InvalidParameterError(f"threshold must be nonnegative, got {tau!r}")
    out = np.sign(xi) * np.maximum(np.abs(xi) - tau_arr, 0.0)
    if np.ndim(out) == 0:
        return float(out)
    return out


class ProxObjective(ABC):
    """Proper convex l.s.c. function accessed through value and prox oracles.

    Implementations must not mutate themselves while evaluating, so one
    instance can drive several trajectories at once.
    """

    dimension: int
    optimal_value: float | None = None
    minimizer: np.ndarray | None = None

    @abstractmethod
    def value(self, x: np.ndarray) -> float:
        """Objective value; may be +inf outside the domain."""

    @abstractmethod
    def prox(self, gamma: float, x: np.ndarray) -> np.ndarray:
        """Unique minimizer of y -> value(y) + |x - y|^2 / (2 gamma)."""


class ScalarPiece(ABC):
    """One coordinate of a separable objective."""

    @abstractmethod
    def value(self, y: float) -> float: ...

    @abstractmethod
    def prox(self, gamma: float, y: float) -> float: ...


@dataclass(frozen=True)
class QuadraticL1Piece(ScalarPiece):
    """y -> curvature * y^2 / 2 + l1_weight * |y|."""

    curvature: float
    l1_weight: float = 0.0

    def value(self, y: float) -> float:
        return 0.5 * self.curvature * y * y + self.l1_weight * abs(y)

    def prox(self, gamma: float, y: float) -> float:
        denom = 1.0 + self.curvature * gamma
        return soft_threshold(y / denom, self.l1_weight * gamma / denom)


@dataclass(frozen=True)
class CallablePiece(ScalarPiece):
    """Arbitrary convex scalar function; prox by the golden-section oracle."""

    fn: Callable[[float], float]
    bracket: tuple[float, float] | None = None

    def value(self, y: float) -> float:
        return float(self.fn(y))

    def prox(self, gamma: float, y: float) -> float:
        return brute_force_prox_1d(self.fn, gamma, y, self.bracket)


class SeparableObjective(ProxObjective):
    """Sum of scalar pieces, one per coordinate; prox splits coordinatewise."""

    def __init__(
        self,
        pieces: Sequence[ScalarPiece],
        minimizer=None,
        optimal_value: float | None = None,
    ):
        if not pieces:
            raise DimensionError("a separable objective needs at least one piece")
        self.pieces = tuple(pieces)
        self.dimension = len(self.pieces)
        self.minimizer = None if minimizer is None else as_point(minimizer, self.dimension, "minimizer")
        self.optimal_value = optimal_value

    def value(self, x: np.ndarray) -> float:
        x = as_point(x, self.dimension)
        return float(sum(piece.value(float(xi)) for piece, xi in zip(self.pieces, x)))

    def prox(self, gamma: float, x: np.ndarray) -> np.ndarray:
        gamma = check_positive(gamma, "gamma")
        x = as_point(x, self.dimension)
        return np.array([piece.prox(gamma, float(xi)) for piece, xi in zip(self.pieces, x)])


class QuadraticL1Objective(SeparableObjective):
    """1/2 sum_i q_i x_i^2 + w ||x||_1 with a vectorised closed-form prox.

    Minimizer is the origin and the optimal value is 0.
    """

    def __init__(self, curvatures: Sequence[float], l1_weight: float = 0.0):
        q = np.asarray(curvatures, dtype=float)
        if q.ndim != 1 or np.any(q < 0) or l1_weight < 0:
            raise InvalidParameterError("curvatures and l1 weight must be nonnegative")
        super().__init__(
            [QuadraticL1Piece(float(qi), float(l1_weight)) for qi in q],
            minimizer=np.zeros(q.shape[0]),
            optimal_value=0.0,
        )
        self.curvatures = q
        self.l1_weight = float(l1_weight)

    def value(self, x: np.ndarray) -> float:
        x = as_point(x, self.dimension)
        return float(0.5 * np.dot(self.curvatures * x, x) + self.l1_weight * np.sum(np.abs(x)))

    def prox(self, gamma: float, x: np.ndarray) -> np.ndarray:
        gamma = check_positive(gamma, "gamma")
        x = as_point(x, self.dimension)
        denom = 1.0 + self.curvatures * gamma
        return soft_threshold(x / denom, self.l1_weight * gamma / denom)


class TestObjective(QuadraticL1Objective):
    """f(x) = 1/2 (q1 x1^2 + q2 x2^2) + w ||x||_1 on R^2 (defaults 1, 1000, 1)."""

    __test__ = False

    def __init__(self, q1: float | None = None, q2: float | None = None, l1_weight: float | None = None):
        s = get_settings()
        self.q1 = s.Q1 if q1 is None else float(q1)
        self.q2 = s.Q2 if q2 is None else float(q2)
        if self.q1 <= 0 or self.q2 <= 0:
            raise InvalidParameterError("test objective curvatures must be positive")
        super().__init__((self.q1, self.q2), s.L1_WEIGHT if l1_weight is None else l1_weight)

    def coordinate(self, i: int) -> Callable[[float], float]:
        """Scalar piece i as a plain function, for the brute-force oracle."""
        return self.pieces[i].value


@lru_cache()
def _default_test_objective() -> TestObjective:
    return TestObjective()


def prox_test_objective(gamma: float, x, objective: TestObjective | None = None) -> np.ndarray:
    """Closed-form prox of the two-dimensional test objective."""
    gamma = check_positive(gamma, "gamma")
    x = as_point(x)
    if x.shape[0] != 2:
        raise DimensionError(f"the test objective is two-dimensional, got dimension {x.shape[0]}")
    obj = objective or _default_test_objective()
    return obj.prox(gamma, x)


def moreau_value(obj: ProxObjective, gamma: float, x) -> float:
    """Moreau envelope f_gamma(x) = f(p) + |x - p|^2 / (2 gamma), p = prox(gamma, x)."""
    gamma = check_positive(gamma, "gamma")
    x = as_point(x, obj.dimension)
    p = obj.prox(gamma, x)
    diff = x - p
    return obj.value(p) + float(np.dot(diff, diff)) / (2.0 * gamma)


def moreau_gradient(obj: ProxObjective, gamma: float, x) -> np.ndarray:
    """Gradient (x - prox(gamma, x)) / gamma; 1/gamma-Lipschitz."""
    gamma = check_positive(gamma, "gamma")
    x = as_point(x, obj.dimension)
    return (x - obj.prox(gamma, x)) / gamma


def brute_force_prox_1d(
    fn: Callable[[float], float],
    gamma: float,
    x: float,
    bracket: tuple[float, float] | None = None,
    tol: float | None = None,
) -> float:
    """
    Minimizer of y -> fn(y) + (x - y)^2 / (2 gamma) by bracketed golden-section search.

    Without a bracket one is grown by doubling [x - 1, x + 1] until the one-sided
    slopes at both ends point inwards. Candidates are compared through
    phi(u) - phi(v) = fn(u) - fn(v) + (v - u)(2x - u - v) / (2 gamma), so only the
    rounding of fn limits the search. The result is finished with one parabolic
    step, accepted only when it does not increase the objective beyond rounding.
    """
    gamma = check_positive(gamma, "gamma")
    x = float(x)
    tol = get_settings().GOLDEN_TOL if tol is None else float(tol)

    def value(y: float) -> float:
        v = float(fn(y))
        if not math.isfinite(v):
            raise BracketError(f"fn({y!r}) = {v!r} is not finite inside the bracket")
        return v

    def gap(u: float, fu: float, v: float, fv: float) -> float:
        # phi(u) - phi(v)
        return fu - fv + (v - u) * (2.0 * x - u - v) / (2.0 * gamma)

    if bracket is None:
        lo, hi = _expand_bracket(value, gap, x)
    else:
        lo, hi = float(bracket[0]), float(bracket[1])
        if not lo < hi:
            raise BracketError(f"invalid bracket [{lo}, {hi}]")

    a, b = lo, hi
    c = b - _INV_GOLDEN * (b - a)
    d = a + _INV_GOLDEN * (b - a)
    fc, fd = value(c), value(d)
    for _ in range(_MAX_GOLDEN_ITERATIONS):
        if b - a <= tol or b - a <= 4.0 * np.spacing(max(abs(a), abs(b))):
            break
        if gap(c, fc, d, fd) <= 0.0:
            b, d, fd = d, c, fc
            c = b - _INV_GOLDEN * (b - a)
            fc = value(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_GOLDEN * (b - a)
            fd = value(d)

    return _parabolic_polish(value, gap, 0.5 * (a + b), lo, hi)


def _expand_bracket(value, gap, x: float) -> tuple[float, float]:
    width = 1.0
    for _ in range(_MAX_BRACKET_DOUBLINGS):
        lo, hi = x - width, x + width
        step = 1e-6 * width
        inner_lo, inner_hi = lo + step, hi - step
        if (gap(inner_lo, value(inner_lo), lo, value(lo)) < 0.0
                and gap(inner_hi, value(inner_hi), hi, value(hi)) < 0.0):
            return lo, hi
        width *= 2.0
    raise BracketError(f"could not bracket the prox subproblem around x={x!r}")


def _parabolic_polish(value, gap, y: float, lo: float, hi: float) -> float:
    h = 1e-3 * (1.0 + abs(y))
    if y - h < lo or y + h > hi:
        return y
    f0, fm, fp = value(y), value(y - h), value(y + h)
    up = gap(y + h, fp, y, f0)
    down = gap(y - h, fm, y, f0)
    curvature = up + down
    if not curvature > 0.0:
        return y
    v = y - 0.5 * h * (up - down) / curvature
    if abs(v - y) >= h:
        return y
    fv = value(v)
    # both points sit at the bottom, where phi differences are rounding noise in fn
    noise = 8.0 * float(np.spacing(max(abs(f0), abs(fv))))
    return v if gap(v, fv, y, f0) <= noise else y
