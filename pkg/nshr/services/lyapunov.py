"""Energy functions, monitored diagnostics, rate fits and the trajectory-level checks."""
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from ..config import get_settings, Settings
from ..errors import InsufficientSamplesError, InvalidParameterError, MissingZeroError
from ..models import DiagnosticsSeries, DynamicKind, DynamicSpec, Trajectory
from .dynamics import constant_beta, driving_map, objective_of, reference_point
from .monotone import majorant_coefficients
from .proxcore import as_point, moreau_value
from .schedules import PolynomialSchedule, validate_assumption_B

logger = logging.getLogger(__name__)

MIN_FIT_SAMPLES = 10


@dataclass(frozen=True)
class LyapunovParams:
    sigma: float
    alpha: float
    beta: float
    x_star: np.ndarray

    def __post_init__(self):
        if not 0 < self.sigma < self.alpha - 1:
            raise InvalidParameterError(f"sigma must lie in (0, alpha - 1), got {self.sigma!r}")

    @property
    def eta(self) -> float:
        return self.sigma * (self.alpha - self.sigma - 1.0) / 2.0

    def a(self, t: float, delta: float) -> float:
        return (t - self.beta * (self.sigma + 1.0 - self.alpha)) * t * delta


def default_sigma(spec: DynamicSpec) -> float:
    """
    alpha - 1 - zeta/2 with zeta = alpha - 3 - p for polynomial schedules; the middle
    of (0, alpha - 1) when no positive zeta is available.
    """
    alpha = spec.alpha
    if alpha > 3 and isinstance(spec.schedule, PolynomialSchedule):
        zeta = validate_assumption_B(spec.schedule, alpha).zeta
        if zeta is not None and 0 < zeta <= alpha - 3:
            return alpha - 1.0 - zeta / 2.0
    return (alpha - 1.0) / 2.0


def lyapunov_params(spec: DynamicSpec, sigma: float | None = None) -> LyapunovParams:
    x_star = reference_point(spec)
    if x_star is None:
        raise MissingZeroError(f"{spec.kind.value} driver has no known minimizer or zero")
    return LyapunovParams(
        sigma=default_sigma(spec) if sigma is None else float(sigma),
        alpha=spec.alpha,
        beta=constant_beta(spec),
        x_star=np.asarray(x_star, dtype=float),
    )


def _anchor_terms(params: LyapunovParams, spec: DynamicSpec, t: float, x, xdot) -> tuple[float, float]:
    sv = spec.schedule.evaluate(t)
    g = driving_map(spec, t, x, sv)
    diff = x - params.x_star
    w = params.sigma * diff + t * xdot + params.beta * t * sv.delta * g
    return 0.5 * float(np.dot(w, w)) + params.eta * float(np.dot(diff, diff)), sv.delta


def lyapunov_value(params: LyapunovParams, spec: DynamicSpec, t: float, x, xdot) -> float:
    """V = a(t)(f_gamma(x) - f*) + 1/2 |sigma(x - x*) + t x' + beta t delta g|^2 + eta |x - x*|^2."""
    if spec.kind is not DynamicKind.NSHR:
        raise InvalidParameterError(f"objective Lyapunov function applies to NSHR, not {spec.kind.value}")
    obj = spec.driver
    if obj.optimal_value is None:
        raise MissingZeroError("objective has no known optimal value")
    x = as_point(x, spec.dimension)
    xdot = as_point(xdot, spec.dimension, "xdot")
    anchor, delta = _anchor_terms(params, spec, t, x, xdot)
    gap = moreau_value(obj, spec.schedule.evaluate(t).gamma, x) - obj.optimal_value
    return params.a(t, delta) * gap + anchor


def lyapunov_value_monotone(sigma: float, eta: float, spec: DynamicSpec, t: float, x, xdot) -> float:
    """V_A = 1/2 |sigma(x - x*) + t x' + beta t delta A_gamma(x)|^2 + eta |x - x*|^2."""
    x_star = reference_point(spec)
    if x_star is None:
        raise MissingZeroError(f"{type(spec.driver).__name__} has no known zero")
    x = as_point(x, spec.dimension)
    xdot = as_point(xdot, spec.dimension, "xdot")
    sv = spec.schedule.evaluate(t)
    g = driving_map(spec, t, x, sv)
    diff = x - x_star
    w = sigma * diff + t * xdot + constant_beta(spec) * t * sv.delta * g
    return 0.5 * float(np.dot(w, w)) + eta * float(np.dot(diff, diff))


def relative_series(values: np.ndarray) -> np.ndarray:
    """values / values[0]; a zero start gives 1 where the value stays 0 and NaN elsewhere."""
    values = np.asarray(values, dtype=float)
    first = values[0]
    if np.isnan(first):
        return np.full(values.shape, np.nan)
    if first == 0:
        return np.where(values == 0, 1.0, np.nan)
    return values / first


def diagnostics(spec: DynamicSpec, traj: Trajectory, sigma: float | None = None) -> DiagnosticsSeries:
    """Monitored quantities at every sample of a simulated trajectory."""
    if len(traj) == 0:
        raise InvalidParameterError("empty trajectory")
    if traj.velocities is None:
        raise InvalidParameterError("trajectory has no recovered velocities")
    obj = objective_of(spec)
    f_star = None if obj is None else obj.optimal_value

    lyap = None
    energy_kinds = (DynamicKind.NSHR, DynamicKind.HRMMD)
    if spec.kind in energy_kinds and reference_point(spec) is not None and spec.beta_constant:
        params = lyapunov_params(spec, sigma)
        if spec.kind is DynamicKind.NSHR and f_star is not None:
            lyap = lambda t, x, xd: lyapunov_value(params, spec, t, x, xd)
        elif spec.kind is DynamicKind.HRMMD:
            lyap = lambda t, x, xd: lyapunov_value_monotone(params.sigma, params.eta, spec, t, x, xd)

    m = len(traj)
    obj_gap = np.full(m, np.nan)
    env_gap = np.full(m, np.nan)
    grad_norm = np.empty(m)
    lyapunov = np.full(m, np.nan)
    xs = traj.positions

    for k, (t, x, xd) in enumerate(zip(traj.times, xs, traj.velocities)):
        sv = spec.schedule.evaluate(t)
        grad_norm[k] = np.linalg.norm(driving_map(spec, t, x, sv))
        if f_star is not None:
            p = obj.prox(sv.gamma, x)
            obj_gap[k] = obj.value(p) - f_star
            env_gap[k] = moreau_value(obj, sv.gamma, x) - f_star
        if lyap is not None:
            lyapunov[k] = lyap(t, x, xd)

    return DiagnosticsSeries(
        t=traj.times.copy(),
        obj_gap=obj_gap,
        env_gap=env_gap,
        grad_norm=grad_norm,
        x_norm=np.linalg.norm(xs, axis=1),
        x=xs.copy(),
        t_xdot_norm=traj.times * np.linalg.norm(traj.velocities, axis=1),
        rel_obj=relative_series(obj_gap),
        rel_grad=relative_series(grad_norm),
        lyapunov=lyapunov,
    )


def _window(times, values, window: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    lo, hi = window
    mask = (times >= lo) & (times <= hi)
    return times[mask], values[mask]


def fit_rate(times, values, window: Sequence[float], floor: float | None = None, s: Settings | None = None) -> float:
    """Least-squares slope of log(value) against log(t) over the window, above the floor."""
    floor = (s or get_settings()).NUMERICAL_FLOOR if floor is None else floor
    t, v = _window(times, values, window)
    if t.shape[0] < MIN_FIT_SAMPLES:
        raise InsufficientSamplesError(f"only {t.shape[0]} samples in window {tuple(window)}")
    mask = np.isfinite(v) & (v > floor)
    if np.count_nonzero(mask) < MIN_FIT_SAMPLES:
        raise InsufficientSamplesError(
            f"only {np.count_nonzero(mask)} samples above the floor {floor:g} in window {tuple(window)}",
            floor_hit=True,
        )
    return float(np.polyfit(np.log(t[mask]), np.log(v[mask]), 1)[0])


def oscillation_metric(times, values, window: Sequence[float], floor: float | None = None, s: Settings | None = None) -> float:
    """Total variation of log(max(value, floor)) minus the absolute net change."""
    floor = (s or get_settings()).NUMERICAL_FLOOR if floor is None else floor
    t, v = _window(times, values, window)
    if t.shape[0] < MIN_FIT_SAMPLES:
        raise InsufficientSamplesError(f"only {t.shape[0]} samples in window {tuple(window)}")
    logs = np.log(np.maximum(v, floor))
    excess = float(np.sum(np.abs(np.diff(logs))) - abs(logs[-1] - logs[0]))
    return max(excess, 0.0)


def lyapunov_onset(times, values, slack: float | None = None, s: Settings | None = None) -> float:
    """
    Earliest sample time after which V never increases by more than
    slack * max(1, |V|) between consecutive samples.
    """
    slack = (s or get_settings()).LYAPUNOV_SLACK if slack is None else slack
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.shape[0] < 2:
        raise InsufficientSamplesError("need at least two samples")
    increase = values[1:] - values[:-1]
    allowed = slack * np.maximum(1.0, np.abs(values[:-1]))
    violations = np.nonzero(~(increase <= allowed))[0]
    if violations.shape[0] == 0:
        return float(times[0])
    return float(times[violations[-1] + 1])


class VelocityDecay(NamedTuple):
    first_decade_max: float
    tail_max: float
    tail_slope: float
    decaying: bool


def velocity_decay(times, t_xdot_norm, s: Settings | None = None) -> VelocityDecay:
    """Compares t|x'| over the first decade [t0, 10 t0] with the last one [T/10, T]."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(t_xdot_norm, dtype=float)
    t0, T = times[0], times[-1]
    first = values[times <= 10.0 * t0]
    tail_t, tail_v = _window(times, values, (T / 10.0, T))
    first_max = float(np.max(first))
    tail_max = float(np.max(tail_v))
    mask = tail_v > (s or get_settings()).NUMERICAL_FLOOR
    if np.count_nonzero(mask) >= 2:
        slope = float(np.polyfit(np.log(tail_t[mask]), np.log(tail_v[mask]), 1)[0])
    else:
        slope = -math.inf
    return VelocityDecay(first_max, tail_max, slope, bool(tail_max < first_max and slope < 0))


def cumulative_integral(times, integrand) -> np.ndarray:
    """Trapezoidal partial sums, starting at 0."""
    times = np.asarray(times, dtype=float)
    integrand = np.asarray(integrand, dtype=float)
    pieces = 0.5 * (integrand[1:] + integrand[:-1]) * np.diff(times)
    return np.concatenate([[0.0], np.cumsum(pieces)])


def energy_integrals(spec: DynamicSpec, traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    """Partial sums of t|x'|^2 and t^3 delta^2 |g|^2 along the samples."""
    t = traj.times
    vel = np.sum(traj.velocities ** 2, axis=1)
    grad_sq = np.empty(len(traj))
    delta = np.empty(len(traj))
    for k, (tk, x) in enumerate(zip(t, traj.positions)):
        sv = spec.schedule.evaluate(tk)
        delta[k] = sv.delta
        g = driving_map(spec, tk, x, sv)
        grad_sq[k] = float(np.dot(g, g))
    return cumulative_integral(t, t * vel), cumulative_integral(t, t ** 3 * delta ** 2 * grad_sq)


def plateau_fraction(times, cumulative) -> float:
    """Share of the total accumulated over the last decade [T/10, T]."""
    times = np.asarray(times, dtype=float)
    cumulative = np.asarray(cumulative, dtype=float)
    total = cumulative[-1]
    if total == 0:
        return 0.0
    start = float(np.interp(times[-1] / 10.0, times, cumulative))
    return float((total - start) / total)


def prox_shadow_violation(series: DiagnosticsSeries) -> float:
    """max(f(prox) - f_gamma); never positive beyond rounding."""
    diff = series.obj_gap - series.env_gap
    if np.all(np.isnan(diff)):
        return -math.inf
    return float(np.nanmax(diff))


class MonotoneDissipation(NamedTuple):
    a: float
    b: float
    c: float
    discriminant: float
    B: float
    L: float
    epsilon: float
    m: float
    n: float
    dissipative: bool


def monotone_dissipation(
    spec: DynamicSpec,
    sigma: float,
    t: float,
    epsilon: float | None = None,
) -> MonotoneDissipation:
    """
    Coefficients of the dissipation estimate dV_A/dt <= -m(t)|x'|^2 - n(t)|A_gamma x|^2
    with m(t) = epsilon t. ``dissipative`` is True once the discriminant is negative and
    m(t) < disc / (4 c), the regime in which the estimate holds.
    """
    alpha = spec.alpha
    if not 0 < sigma < alpha - 1:
        raise InvalidParameterError(f"sigma must lie in (0, alpha - 1), got {sigma!r}")
    beta = constant_beta(spec)
    sv = spec.schedule.evaluate(t)
    B = alpha - sigma - 1.0
    a = t * (sigma + 1.0 - alpha)
    b = (beta * (sigma + 1.0 - alpha) - t) * t * sv.delta
    c = -(sigma * t * sv.gamma * sv.delta + beta * t * t * sv.delta ** 2)
    disc = b * b - 4.0 * a * c
    L = sv.gamma / (t * t * sv.delta)
    if epsilon is None:
        epsilon = 0.5 * (B - 1.0 / (4.0 * sigma * L))
    m = epsilon * t
    n = (disc - 4.0 * m * c) / (4.0 * (m + a))
    dissipative = False
    if disc < 0 and 0 < m < disc / (4.0 * c):
        m, n = majorant_coefficients(a, b, c, epsilon_fraction=m * 4.0 * c / disc)
        dissipative = True
    return MonotoneDissipation(a, b, c, disc, B, L, epsilon, m, n, dissipative)
