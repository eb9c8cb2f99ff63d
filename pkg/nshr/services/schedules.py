"""Time-varying parameters delta(t), gamma(t) and the standing-assumption validators."""
import math
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from ..config import get_settings, Settings
from ..errors import InvalidParameterError
from ..models import AssumptionReport, ConditionVerdict

logger = logging.getLogger(__name__)


class ScheduleValues(NamedTuple):
    delta: float
    delta_dot: float
    gamma: float
    gamma_dot: float


class ParameterSchedule(ABC):
    """delta(t) > 0 and gamma(t) > 0 with first derivatives, defined for t >= t0."""

    t0: float

    @abstractmethod
    def delta(self, t: float) -> float: ...

    @abstractmethod
    def delta_dot(self, t: float) -> float: ...

    @abstractmethod
    def gamma(self, t: float) -> float: ...

    @abstractmethod
    def gamma_dot(self, t: float) -> float: ...

    def evaluate(self, t: float) -> ScheduleValues:
        if t < self.t0:
            raise InvalidParameterError(f"schedule evaluated at t={t!r} before its start t0={self.t0!r}")
        values = ScheduleValues(self.delta(t), self.delta_dot(t), self.gamma(t), self.gamma_dot(t))
        if not (values.delta > 0 and values.gamma > 0):
            raise InvalidParameterError(f"schedule lost positivity at t={t!r}: {values}")
        return values

    def describe(self) -> dict:
        return {"type": type(self).__name__, "t0": self.t0}


@dataclass(frozen=True)
class PowerLawSchedule(ParameterSchedule):
    """delta(t) = delta_scale t^delta_power, gamma(t) = gamma_scale t^gamma_power."""

    delta_scale: float
    delta_power: float
    gamma_scale: float
    gamma_power: float
    t0: float = 1.0

    def __post_init__(self):
        if not (self.delta_scale > 0 and self.gamma_scale > 0):
            raise InvalidParameterError("power-law scales must be positive")
        if not self.t0 > 0:
            raise InvalidParameterError(f"schedule start must be positive, got {self.t0!r}")

    def delta(self, t: float) -> float:
        return self.delta_scale * t ** self.delta_power

    def delta_dot(self, t: float) -> float:
        if self.delta_power == 0:
            return 0.0
        return self.delta_scale * self.delta_power * t ** (self.delta_power - 1.0)

    def gamma(self, t: float) -> float:
        return self.gamma_scale * t ** self.gamma_power

    def gamma_dot(self, t: float) -> float:
        if self.gamma_power == 0:
            return 0.0
        return self.gamma_scale * self.gamma_power * t ** (self.gamma_power - 1.0)

    def describe(self) -> dict:
        return {
            "type": type(self).__name__,
            "delta_scale": self.delta_scale,
            "delta_power": self.delta_power,
            "gamma_scale": self.gamma_scale,
            "gamma_power": self.gamma_power,
            "t0": self.t0,
        }


class PolynomialSchedule(PowerLawSchedule):
    """delta(t) = t^p, gamma(t) = c t^(p+2)."""

    def __init__(self, p: float, c: float, t0: float = 1.0):
        if p < 0:
            raise InvalidParameterError(f"p must be nonnegative, got {p!r}")
        if not c > 0:
            raise InvalidParameterError(f"c must be positive, got {c!r}")
        super().__init__(1.0, float(p), float(c), float(p) + 2.0, float(t0))

    @property
    def p(self) -> float:
        return self.delta_power

    @property
    def c(self) -> float:
        return self.gamma_scale

    def describe(self) -> dict:
        return {"type": type(self).__name__, "p": self.p, "c": self.c, "t0": self.t0}


@dataclass(frozen=True)
class CallableSchedule(ParameterSchedule):
    delta_fn: Callable[[float], float]
    delta_dot_fn: Callable[[float], float]
    gamma_fn: Callable[[float], float]
    gamma_dot_fn: Callable[[float], float]
    t0: float = 1.0

    def delta(self, t: float) -> float:
        return float(self.delta_fn(t))

    def delta_dot(self, t: float) -> float:
        return float(self.delta_dot_fn(t))

    def gamma(self, t: float) -> float:
        return float(self.gamma_fn(t))

    def gamma_dot(self, t: float) -> float:
        return float(self.gamma_dot_fn(t))


def schedule_eval(sched: ParameterSchedule, t: float) -> ScheduleValues:
    return sched.evaluate(float(t))


def check_derivatives(sched: ParameterSchedule, times: Sequence[float], rel_step: float = 1e-5) -> float:
    """
    Largest relative mismatch between the analytic derivatives and central finite
    differences of delta and gamma over ``times``.
    """
    worst = 0.0
    for t in times:
        h = rel_step * t
        if t - h < sched.t0:
            raise InvalidParameterError(f"t={t!r} too close to the schedule start for a central difference")
        for fn, dfn in ((sched.delta, sched.delta_dot), (sched.gamma, sched.gamma_dot)):
            fd = (fn(t + h) - fn(t - h)) / (2.0 * h)
            exact = dfn(t)
            scale = max(abs(exact), abs(fn(t)) / t)
            worst = max(worst, abs(fd - exact) / scale)
    return worst


def _geometric_grid(sched: ParameterSchedule, s: Settings) -> np.ndarray:
    return sched.t0 * 2.0 ** np.arange(s.GRID_DOUBLINGS + 1)


def _trend(times: np.ndarray, values: np.ndarray) -> float:
    """Slope of log|value| against log t; 0 for identically vanishing values."""
    mags = np.abs(values)
    if np.all(mags == 0):
        return 0.0
    if np.any(mags == 0):
        return float(np.polyfit(np.log(times), values, 1)[0])
    return float(np.polyfit(np.log(times), np.log(mags), 1)[0])


def _tail(arr: np.ndarray) -> np.ndarray:
    return arr[len(arr) // 2:]


def validate_assumption_B(sched: ParameterSchedule, alpha: float, s: Settings | None = None) -> AssumptionReport:
    """
    Standing assumptions of the optimisation analysis:
      (i)   liminf gamma_dot / (t delta) > 0
      (ii)  t delta / gamma = O(1/t)
      (iii) gamma_dot / gamma = O(1/t)
      (iv)  0 <= t delta_dot / delta <= alpha - 3 - zeta for some zeta > 0
    Polynomial schedules are decided in closed form, anything else on a geometric grid.
    """
    s = s or get_settings()
    if not alpha > 3:
        raise InvalidParameterError(f"alpha must exceed 3, got {alpha!r}")

    if isinstance(sched, PolynomialSchedule):
        p, c = sched.p, sched.c
        zeta = alpha - 3.0 - p
        verdicts = [
            ConditionVerdict("i", c * (p + 2.0) > 0, c * (p + 2.0), 0.0, "gamma_dot/(t delta) = c(p+2)"),
            ConditionVerdict("ii", True, 1.0 / c, None, "t^2 delta/gamma = 1/c"),
            ConditionVerdict("iii", True, p + 2.0, None, "t gamma_dot/gamma = p+2"),
            ConditionVerdict("iv", 0.0 <= p < alpha - 3.0, p, alpha - 3.0, "t delta_dot/delta = p"),
        ]
        report = AssumptionReport("B", "analytic", verdicts, margins={"i": c * (p + 2.0), "iv": zeta}, zeta=zeta)
    else:
        times = _geometric_grid(sched, s)
        vals = [sched.evaluate(t) for t in times]
        delta = np.array([v.delta for v in vals])
        delta_dot = np.array([v.delta_dot for v in vals])
        gamma = np.array([v.gamma for v in vals])
        gamma_dot = np.array([v.gamma_dot for v in vals])
        tt = _tail(times)

        r1 = _tail(gamma_dot / (times * delta))
        r2 = _tail(times ** 2 * delta / gamma)
        r3 = _tail(times * np.abs(gamma_dot) / gamma)
        r4 = _tail(times * delta_dot / delta)
        sup4 = float(np.max(r4))
        zeta = alpha - 3.0 - sup4
        tol = s.TREND_TOL

        ok1 = bool(np.min(r1) > 0 and _trend(tt, r1) >= -tol)
        ok2 = _trend(tt, r2) <= tol
        ok3 = _trend(tt, r3) <= tol
        ok4 = bool(np.min(r4) >= -tol and _trend(tt, r4) <= tol and zeta > 0)
        verdicts = [
            ConditionVerdict("i", ok1, float(r1[-1]), 0.0, "gamma_dot/(t delta) bounded away from 0"),
            ConditionVerdict("ii", ok2, float(r2[-1]), None, "t^2 delta/gamma bounded"),
            ConditionVerdict("iii", ok3, float(r3[-1]), None, "t gamma_dot/gamma bounded"),
            ConditionVerdict("iv", ok4, sup4, alpha - 3.0, "sup t delta_dot/delta"),
        ]
        report = AssumptionReport("B", "grid", verdicts, margins={"i": float(np.min(r1)), "iv": zeta}, zeta=zeta)

    logger.debug(f"Assumption B ({report.method}) for alpha={alpha}: satisfied={report.satisfied}")
    return report


def validate_assumption_D(
    sched: ParameterSchedule,
    alpha: float,
    sigma: float,
    s: Settings | None = None,
) -> AssumptionReport:
    """
    Standing assumptions of the monotone-operator analysis:
      (i)   lim gamma / (t^2 delta) > 1 / (4 (alpha - sigma - 1) sigma)
      (ii)  0 < t delta_dot / delta <= M
      (iii) |gamma_dot| / gamma = O(1/t)
    """
    s = s or get_settings()
    if not alpha > 1:
        raise InvalidParameterError(f"alpha must exceed 1, got {alpha!r}")
    if not 0 < sigma < alpha - 1:
        raise InvalidParameterError(f"sigma must lie in (0, alpha - 1) = (0, {alpha - 1!r}), got {sigma!r}")
    threshold = 1.0 / (4.0 * (alpha - sigma - 1.0) * sigma)

    if isinstance(sched, PolynomialSchedule):
        p, c = sched.p, sched.c
        verdicts = [
            ConditionVerdict("i", c > threshold, c, threshold, "gamma/(t^2 delta) = c"),
            ConditionVerdict("ii", p > 0, p, None, "t delta_dot/delta = p"),
            ConditionVerdict("iii", True, p + 2.0, None, "t gamma_dot/gamma = p+2"),
        ]
        report = AssumptionReport(
            "D", "analytic", verdicts, margins={"i": c - threshold}, M=p if p > 0 else None,
            threshold=threshold, limit=c,
        )
    else:
        times = _geometric_grid(sched, s)
        vals = [sched.evaluate(t) for t in times]
        delta = np.array([v.delta for v in vals])
        delta_dot = np.array([v.delta_dot for v in vals])
        gamma = np.array([v.gamma for v in vals])
        gamma_dot = np.array([v.gamma_dot for v in vals])
        tt = _tail(times)
        tol = s.TREND_TOL

        ratio = _tail(gamma / (times ** 2 * delta))
        limit = float(ratio[-1])
        r2 = _tail(times * delta_dot / delta)
        r3 = _tail(times * np.abs(gamma_dot) / gamma)
        M = float(np.max(r2))

        ok1 = bool(abs(_trend(tt, ratio)) <= tol and limit > threshold)
        ok2 = bool(np.min(r2) > 0 and _trend(tt, r2) <= tol and math.isfinite(M))
        ok3 = _trend(tt, r3) <= tol
        verdicts = [
            ConditionVerdict("i", ok1, limit, threshold, "limit of gamma/(t^2 delta)"),
            ConditionVerdict("ii", ok2, M, None, "sup t delta_dot/delta"),
            ConditionVerdict("iii", ok3, float(r3[-1]), None, "t gamma_dot/gamma bounded"),
        ]
        report = AssumptionReport(
            "D", "grid", verdicts, margins={"i": limit - threshold}, M=M, threshold=threshold, limit=limit,
        )

    logger.debug(f"Assumption D ({report.method}) for alpha={alpha}, sigma={sigma}: satisfied={report.satisfied}")
    return report
