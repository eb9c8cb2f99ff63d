"""
Experimental proximal discretisation of the smoothed high-resolution dynamic.

Each step resolves its implicit envelope-gradient equation with a single prox
evaluation. No convergence theory backs the scheme; runs are property-checked.
"""
import logging

import numpy as np

from ..config import get_settings, Settings
from ..errors import NonFiniteError
from ..models import DiagnosticsSeries, DiscreteState, DnshrConfig, DnshrHistory, StepRecord
from .lyapunov import relative_series
from .proxcore import TestObjective, as_point, moreau_gradient, moreau_value
from .schedules import PolynomialSchedule

logger = logging.getLogger(__name__)


def dnshr_config(
    h: float | None = None,
    n: int | None = None,
    alpha: float | None = None,
    beta: float | None = None,
    p: float | None = None,
    c: float | None = None,
    objective=None,
    s: Settings | None = None,
) -> DnshrConfig:
    """Polynomial-schedule configuration with the constants table as defaults."""
    s = s or get_settings()
    h = s.DNSHR_H if h is None else h
    return DnshrConfig(
        h=h,
        alpha=s.ALPHA if alpha is None else alpha,
        beta=s.BETA if beta is None else beta,
        # sampled at t_k = k h, so the schedule starts at h
        schedule=PolynomialSchedule(s.P if p is None else p, s.C if c is None else c, t0=h),
        objective=objective or TestObjective(),
        max_iterations=s.DNSHR_N if n is None else n,
        stop_threshold=s.DNSHR_STOP,
        divergence_factor=s.DNSHR_DIVERGENCE_FACTOR,
    )


def _finite(name: str, value) -> None:
    if not np.all(np.isfinite(value)):
        raise NonFiniteError(name)


def dnshr_initial_state(config: DnshrConfig, x0, x1) -> DiscreteState:
    """State at k = 1 with g_0 = grad f_{gamma_1}(x_1) and delta_0 = delta(h)."""
    obj = config.objective
    x0 = as_point(x0, obj.dimension, "x0")
    x1 = as_point(x1, obj.dimension, "x1")
    sv = config.schedule.evaluate(config.h)
    return DiscreteState(
        k=1,
        x=x1,
        x_prev=x0,
        g_prev=moreau_gradient(obj, sv.gamma, x1),
        delta_prev=sv.delta,
    )


def dnshr_step(state: DiscreteState, config: DnshrConfig) -> DiscreteState:
    k, h = state.k, config.h
    obj = config.objective
    alpha, beta = config.alpha, config.beta
    now = config.schedule.evaluate(k * h)
    nxt = config.schedule.evaluate((k + 1) * h)

    p = obj.prox(now.gamma, state.x)
    g = (state.x - p) / now.gamma
    _finite("g_k", g)

    r = (
        2.0 * state.x - state.x_prev
        - (alpha * h / k) * (state.x - state.x_prev)
        - beta * h * (now.delta * g - state.delta_prev * state.g_prev)
        - (beta * h / k) * state.delta_prev * state.g_prev
    )
    _finite("r_k+1", r)

    s_next = nxt.delta * h * h
    lam = nxt.gamma + s_next
    u = obj.prox(lam, r)
    _finite("u_k+1", u)
    x_next = (s_next / lam) * u + (nxt.gamma / lam) * r
    _finite("x_k+1", x_next)

    g_next = (r - u) / lam
    g_fresh = moreau_gradient(obj, nxt.gamma, x_next)
    record = StepRecord(
        t_next=(k + 1) * h,
        r=r,
        u=u,
        lam=lam,
        s=s_next,
        g_next=g_next,
        implicit_residual=float(np.linalg.norm(x_next + s_next * g_fresh - r)),
        gradient_mismatch=float(np.linalg.norm(g_next - g_fresh)),
    )
    return DiscreteState(k=k + 1, x=x_next, x_prev=state.x, g_prev=g, delta_prev=now.delta, record=record)


def dnshr_run(config: DnshrConfig, x0, x1) -> DnshrHistory:
    """
    Iterates until the gap f(u_k) - f* (or |g_k| when f* is unknown) drops below the
    stop threshold, the iteration budget is spent, or the divergence guard trips.
    """
    obj = config.objective
    f_star = obj.optimal_value
    state = dnshr_initial_state(config, x0, x1)
    bound = config.divergence_factor * (1.0 + float(np.linalg.norm(state.x_prev)))

    sv1 = config.schedule.evaluate(config.h)
    u1 = obj.prox(sv1.gamma, state.x)
    ks = [1]
    iterates = [state.x]
    proxes = [u1]
    grad_norms = [float(np.linalg.norm(state.g_prev))]
    gaps = [np.nan if f_star is None else obj.value(u1) - f_star]
    residuals = [0.0]
    mismatches = [0.0]

    def converged() -> bool:
        watched = grad_norms[-1] if f_star is None else gaps[-1]
        return watched < config.stop_threshold

    logger.info(f"D-NSHR run: h={config.h}, N={config.max_iterations}, alpha={config.alpha}, beta={config.beta}")
    stop_reason = "max_iterations"
    if converged():
        stop_reason = "threshold"
    else:
        while len(ks) < config.max_iterations:
            try:
                state = dnshr_step(state, config)
            except NonFiniteError as e:
                logger.warning(f"D-NSHR stopped at k={state.k}: {e}")
                stop_reason = "diverged"
                break
            rec = state.record
            ks.append(state.k)
            iterates.append(state.x)
            proxes.append(rec.u)
            grad_norms.append(float(np.linalg.norm(rec.g_next)))
            gaps.append(np.nan if f_star is None else obj.value(rec.u) - f_star)
            residuals.append(rec.implicit_residual)
            mismatches.append(rec.gradient_mismatch)

            if float(np.linalg.norm(state.x)) > bound:
                logger.warning(f"D-NSHR divergence guard tripped at k={state.k}")
                stop_reason = "diverged"
                break
            if converged():
                stop_reason = "threshold"
                break

    logger.info(f"D-NSHR finished after {len(ks)} iterates ({stop_reason})")
    ks_arr = np.asarray(ks, dtype=int)
    return DnshrHistory(
        ks=ks_arr,
        times=ks_arr * config.h,
        iterates=np.vstack(iterates),
        proxes=np.vstack(proxes),
        gaps=np.asarray(gaps, dtype=float),
        grad_norms=np.asarray(grad_norms, dtype=float),
        implicit_residuals=np.asarray(residuals, dtype=float),
        gradient_mismatches=np.asarray(mismatches, dtype=float),
        stop_reason=stop_reason,
    )


def dnshr_diagnostics(config: DnshrConfig, history: DnshrHistory) -> DiagnosticsSeries:
    """Same monitored columns as continuous runs, with t_k = k h and finite-difference velocity."""
    obj = config.objective
    f_star = obj.optimal_value
    t = history.times
    xs = history.iterates
    env_gap = np.full(t.shape, np.nan)
    if f_star is not None:
        env_gap = np.array([
            moreau_value(obj, config.schedule.evaluate(tk).gamma, x) - f_star for tk, x in zip(t, xs)
        ])
    vel = np.zeros(t.shape)
    if t.shape[0] > 1:
        vel[1:] = np.linalg.norm(np.diff(xs, axis=0), axis=1) / config.h
    return DiagnosticsSeries(
        t=t.astype(float),
        obj_gap=history.gaps,
        env_gap=env_gap,
        grad_norm=history.grad_norms,
        x_norm=np.linalg.norm(xs, axis=1),
        x=xs,
        t_xdot_norm=t * vel,
        rel_obj=relative_series(history.gaps),
        rel_grad=relative_series(history.grad_norms),
        lyapunov=np.full(t.shape, np.nan),
    )
