"""
Vector fields of the smoothed high-resolution dynamic, its monotone-operator
version, the two smoothed baselines and the two Newton-like benchmark dynamics.

Every kind is the second-order equation

    x'' + (alpha/t) x' + d/dt[c(t) g(t, x)] + e(t) g(t, x) = 0

with g the driving map. The shift form integrates (x, v), v = x' + c(t) g(t, x),
so d/dt[c g] is never evaluated. The exact (x, y) form is available for NSHR.
"""
import logging
import math
from typing import NamedTuple, Sequence

import numpy as np

from ..config import get_settings, Settings
from ..errors import InvalidParameterError, UnsupportedDynamicError
from ..models import DynamicKind, DynamicSpec, IntegratorConfig, StateLayout, Trajectory
from .integrate import integrate, resample
from .proxcore import ProxObjective, as_point, check_positive, moreau_gradient
from .schedules import ParameterSchedule, ScheduleValues

logger = logging.getLogger(__name__)


class Coefficients(NamedTuple):
    c: float  # inside the time derivative
    e: float  # in front of the driving map


def constant_beta(spec: DynamicSpec) -> float:
    if not spec.beta_constant:
        raise UnsupportedDynamicError(
            f"{spec.kind.value}: a time-varying beta(t) inside the time derivative is not supported"
        )
    return float(spec.beta)


def objective_of(spec: DynamicSpec) -> ProxObjective | None:
    """The objective behind the driver, if any (subdifferential operators expose theirs)."""
    if spec.kind is DynamicKind.HRMMD:
        return getattr(spec.driver, "objective", None)
    return spec.driver


def reference_point(spec: DynamicSpec) -> np.ndarray | None:
    """Minimizer of the objective or zero of the operator."""
    if spec.kind is DynamicKind.HRMMD:
        return spec.driver.zero
    return spec.driver.minimizer


def _check_time(spec: DynamicSpec, t: float) -> None:
    if t < spec.t0:
        raise InvalidParameterError(f"t={t!r} is before the dynamic's start t0={spec.t0!r}")


def driving_map(spec: DynamicSpec, t: float, x: np.ndarray, sv: ScheduleValues | None = None) -> np.ndarray:
    """Moreau gradient (or Yosida approximation) at the schedule's gamma(t)."""
    sv = sv or spec.schedule.evaluate(t)
    if spec.kind is DynamicKind.HRMMD:
        return spec.driver.yosida(sv.gamma, x)
    return moreau_gradient(spec.driver, sv.gamma, x)


def coefficients(spec: DynamicSpec, t: float, sv: ScheduleValues | None = None) -> Coefficients:
    sv = sv or spec.schedule.evaluate(t)
    kind = spec.kind
    if kind in (DynamicKind.NSHR, DynamicKind.HRMMD):
        beta = constant_beta(spec)
        return Coefficients(beta * sv.delta, (1.0 + beta / t) * sv.delta)
    if kind is DynamicKind.ATTOUCH_LASZLO:
        return Coefficients(constant_beta(spec), 1.0)
    if kind is DynamicKind.BOT_KARAPETYANTS:
        # delta carries b(t)
        return Coefficients(constant_beta(spec), sv.delta)
    if kind is DynamicKind.BASELINE_DELTA:
        return Coefficients(0.0, sv.delta)
    if kind is DynamicKind.BASELINE_UNIT:
        return Coefficients(0.0, 1.0)
    raise UnsupportedDynamicError(f"unknown dynamic kind {kind!r}")


def _require_xy_form(spec: DynamicSpec) -> float:
    if spec.kind is not DynamicKind.NSHR:
        raise UnsupportedDynamicError(f"the (x, y) form exists for NSHR only, not {spec.kind.value}")
    beta = constant_beta(spec)
    if not beta > 0:
        raise InvalidParameterError("the (x, y) form needs beta > 0; use the shift form for beta = 0")
    return beta


def compatibility_y0(
    x0,
    v0,
    t0: float,
    alpha: float,
    beta: float,
    sched: ParameterSchedule,
    obj: ProxObjective,
) -> np.ndarray:
    """y0 making the (x, y) system start with velocity v0."""
    if not beta > 0:
        raise InvalidParameterError("compatibility needs beta > 0; use the shift form for beta = 0")
    x0 = as_point(x0, obj.dimension, "x0")
    v0 = as_point(v0, obj.dimension, "v0")
    sv = sched.evaluate(t0)
    grad = moreau_gradient(obj, sv.gamma, x0)
    return -beta * (v0 + beta * sv.delta * grad + ((alpha - 1.0) / t0 - 1.0 / beta) * x0)


def xy_vector_field(spec: DynamicSpec, t: float, state: np.ndarray) -> np.ndarray:
    """
    d/dt (x, y) for NSHR:
        x' = -beta delta grad - ((alpha-1)/t - 1/beta) x - y/beta
        y' = (1/beta - (alpha-2)/t) x - (1/t + 1/beta) y
    """
    beta = _require_xy_form(spec)
    _check_time(spec, t)
    n = spec.dimension
    x, y = state[:n], state[n:]
    sv = spec.schedule.evaluate(t)
    grad = driving_map(spec, t, x, sv)
    alpha = spec.alpha
    dx = -beta * sv.delta * grad - ((alpha - 1.0) / t - 1.0 / beta) * x - y / beta
    dy = (1.0 / beta - (alpha - 2.0) / t) * x - (1.0 / t + 1.0 / beta) * y
    return np.concatenate([dx, dy])


def shift_vector_field(spec: DynamicSpec, t: float, state: np.ndarray) -> np.ndarray:
    """d/dt (x, v): x' = v - c g, v' = -(alpha/t)(v - c g) - e g."""
    _check_time(spec, t)
    n = spec.dimension
    x, v = state[:n], state[n:]
    sv = spec.schedule.evaluate(t)
    g = driving_map(spec, t, x, sv)
    coef = coefficients(spec, t, sv)
    xdot = v - coef.c * g
    return np.concatenate([xdot, -(spec.alpha / t) * xdot - coef.e * g])


def vector_field(spec: DynamicSpec, layout: StateLayout = StateLayout.SHIFT):
    if layout is StateLayout.XY:
        _require_xy_form(spec)
        return lambda t, z: xy_vector_field(spec, t, z)
    return lambda t, z: shift_vector_field(spec, t, z)


def recover_velocity(spec: DynamicSpec, t: float, state: np.ndarray, layout: StateLayout = StateLayout.SHIFT) -> np.ndarray:
    n = spec.dimension
    x, w = state[:n], state[n:]
    sv = spec.schedule.evaluate(t)
    g = driving_map(spec, t, x, sv)
    if layout is StateLayout.XY:
        beta = _require_xy_form(spec)
        return -beta * sv.delta * g - ((spec.alpha - 1.0) / t - 1.0 / beta) * x - w / beta
    return w - coefficients(spec, t, sv).c * g


def initial_state(spec: DynamicSpec, x0, v0, layout: StateLayout = StateLayout.SHIFT) -> np.ndarray:
    x0 = as_point(x0, spec.dimension, "x0")
    v0 = as_point(v0, spec.dimension, "v0")
    if layout is StateLayout.XY:
        beta = _require_xy_form(spec)
        y0 = compatibility_y0(x0, v0, spec.t0, spec.alpha, beta, spec.schedule, spec.driver)
        return np.concatenate([x0, y0])
    sv = spec.schedule.evaluate(spec.t0)
    g = driving_map(spec, spec.t0, x0, sv)
    return np.concatenate([x0, v0 + coefficients(spec, spec.t0, sv).c * g])


def xy_to_shift(spec: DynamicSpec, t: float, state: np.ndarray) -> np.ndarray:
    """Maps an (x, y) state to the (x, v) state with the same position and velocity."""
    n = spec.dimension
    x = state[:n]
    xdot = recover_velocity(spec, t, state, StateLayout.XY)
    sv = spec.schedule.evaluate(t)
    return np.concatenate([x, xdot + coefficients(spec, t, sv).c * driving_map(spec, t, x, sv)])


def simulate(
    spec: DynamicSpec,
    x0=None,
    v0=None,
    t_end: float | None = None,
    config: IntegratorConfig | None = None,
    sample_grid: Sequence[float] | None = None,
    layout: StateLayout = StateLayout.SHIFT,
    s: Settings | None = None,
) -> Trajectory:
    """Integrates one dynamic and fills in the recovered velocities."""
    s = s or get_settings()
    x0 = s.X0 if x0 is None else x0
    v0 = s.V0 if v0 is None else v0
    t_end = s.T_END if t_end is None else t_end
    if sample_grid is None:
        sample_grid = np.geomspace(spec.t0, t_end, s.SAMPLES)
    z0 = initial_state(spec, x0, v0, layout)

    logger.info(f"Simulating {spec.kind.value} ({layout.value} form) on [{spec.t0}, {t_end}]")
    bounds = lipschitz_bounds(spec, spec.t0)
    logger.debug(f"Lipschitz bound at t0: K={bounds.K:.3e}, suggested max step {bounds.suggested_max_step:.3e}")

    traj = integrate(vector_field(spec, layout), spec.t0, z0, t_end, config, sample_grid, dimension=spec.dimension, s=s)
    traj.layout = layout
    traj.velocities = np.vstack([
        recover_velocity(spec, t, z, layout) for t, z in zip(traj.times, traj.states)
    ])
    logger.info(
        f"Simulation of {spec.kind.value} finished: {traj.stats.accepted} steps accepted, "
        f"{traj.stats.rejected} rejected"
    )
    return traj


def second_order_residual(spec: DynamicSpec, traj: Trajectory, t_k: float, h: float = 1e-3) -> float:
    """
    |x'' + (alpha/t) x' + d/dt[c g] + e g| at t_k, with x'' from central differences
    of the recovered velocity and x', d/dt[c g] from central differences of x and c g,
    all on the dense output at t_k - h, t_k, t_k + h.
    """
    check_positive(h, "h")
    if traj.dense is None:
        raise InvalidParameterError("residual check needs a trajectory with dense output")
    if t_k - h < traj.dense.t_start or t_k + h > traj.dense.t_end:
        raise InvalidParameterError(f"t={t_k!r} has no neighbours at distance {h!r} inside the trajectory")
    layout = traj.layout or StateLayout.SHIFT
    local = resample(traj, [t_k - h, t_k, t_k + h])
    n = spec.dimension

    xs, vels, cgs = [], [], []
    for t, z in zip(local.times, local.states):
        x = z[:n]
        sv = spec.schedule.evaluate(t)
        g = driving_map(spec, t, x, sv)
        xs.append(x)
        vels.append(recover_velocity(spec, t, z, layout))
        cgs.append(coefficients(spec, t, sv).c * g)

    xddot = (vels[2] - vels[0]) / (2.0 * h)
    xdot = (xs[2] - xs[0]) / (2.0 * h)
    dcg = (cgs[2] - cgs[0]) / (2.0 * h)
    sv = spec.schedule.evaluate(t_k)
    eg = coefficients(spec, t_k, sv).e * driving_map(spec, t_k, xs[1], sv)
    return float(np.linalg.norm(xddot + (spec.alpha / t_k) * xdot + dcg + eg))


class LipschitzBounds(NamedTuple):
    a: float
    b: float
    K: float
    P: float
    suggested_max_step: float


def lipschitz_bounds(spec: DynamicSpec, t: float) -> LipschitzBounds:
    """
    Lipschitz constant K(t) = sqrt(a^2 + b^2) of the (x, y) field and growth bound
    P(t) = max(beta delta/gamma |x*|, K). For kinds without the (x, y) form the
    shift field's constant is used: a = |c|/gamma + |e|/gamma, b = 1 + alpha/t.
    """
    _check_time(spec, t)
    sv = spec.schedule.evaluate(t)
    alpha = spec.alpha
    ref = reference_point(spec)
    ref_norm = 0.0 if ref is None else float(np.linalg.norm(ref))
    if spec.kind is DynamicKind.NSHR and spec.beta_constant and spec.beta > 0:
        beta = float(spec.beta)
        a = beta * sv.delta / sv.gamma + abs((alpha - 1.0) / t - 1.0 / beta) + abs(1.0 / beta - (alpha - 2.0) / t)
        b = 1.0 / beta + abs(1.0 / t + 1.0 / beta)
        lead = beta * sv.delta / sv.gamma
    else:
        coef = coefficients(spec, t, sv)
        lead = (abs(coef.c) * (1.0 + alpha / t) + abs(coef.e)) / sv.gamma
        a = lead
        b = 1.0 + alpha / t
    K = math.hypot(a, b)
    return LipschitzBounds(a, b, K, max(lead * ref_norm, K), 1.0 / K)


def damping_term_bound(spec: DynamicSpec, t: float, x, xdot) -> float:
    """
    Bound on |d/dt[delta(t) g(t, x(t))]|:
        (delta/gamma)|x'| + (2 delta |gamma'| / gamma^2 + |delta'| / gamma) |x - x*|
    Holds for Moreau gradients and Yosida approximations alike.
    """
    ref = reference_point(spec)
    if ref is None:
        raise InvalidParameterError("damping bound needs a known minimizer or zero")
    _check_time(spec, t)
    x = as_point(x, spec.dimension)
    xdot = as_point(xdot, spec.dimension, "xdot")
    sv = spec.schedule.evaluate(t)
    dist = float(np.linalg.norm(x - ref))
    return (
        sv.delta / sv.gamma * float(np.linalg.norm(xdot))
        + (2.0 * sv.delta * abs(sv.gamma_dot) / sv.gamma ** 2 + abs(sv.delta_dot) / sv.gamma) * dist
    )
