"""
Adaptive Dormand-Prince 5(4) integration with PI step control and quartic dense output.

The state is a flat vector; the vector field is any ``f(t, z) -> dz``.
"""
import logging
from typing import Callable, Sequence

import numpy as np

from ..config import get_settings, Settings
from ..errors import InvalidParameterError, MaxStepsExceededError, NonFiniteError, StepSizeUnderflowError
from ..models import IntegratorConfig, IntegratorStats, Trajectory

logger = logging.getLogger(__name__)

VectorField = Callable[[float, np.ndarray], np.ndarray]

# Butcher tableau (FSAL: the seventh stage is f at the new point)
C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
]
B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# difference between the 5th and embedded 4th order weights, over all seven stages
E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# quartic continuous extension: y(t + th h) = y + h (K^T P) [th, th^2, th^3, th^4]
P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

# PI controller exponents
ALPHA_PI = 0.17
BETA_PI = 0.04


class DenseOutput:
    """Piecewise quartic interpolant over the accepted steps."""

    def __init__(self):
        self._starts: list[float] = []
        self._steps: list[float] = []
        self._bases: list[np.ndarray] = []
        self._coeffs: list[np.ndarray] = []
        self.t_end: float | None = None

    def add(self, t: float, h: float, z: np.ndarray, Q: np.ndarray) -> None:
        self._starts.append(t)
        self._steps.append(h)
        self._bases.append(z)
        self._coeffs.append(Q)
        self.t_end = t + h

    @property
    def t_start(self) -> float:
        return self._starts[0]

    def __call__(self, t: float) -> np.ndarray:
        if not self._starts:
            raise InvalidParameterError("dense output is empty")
        if t < self._starts[0] or t > self.t_end:
            raise InvalidParameterError(f"t={t!r} outside the integrated span [{self._starts[0]}, {self.t_end}]")
        i = int(np.searchsorted(self._starts, t, side="right")) - 1
        i = min(max(i, 0), len(self._starts) - 1)
        return _interpolate(self._bases[i], self._coeffs[i], self._steps[i], (t - self._starts[i]) / self._steps[i])


def _interpolate(z: np.ndarray, Q: np.ndarray, h: float, theta: float) -> np.ndarray:
    powers = np.cumprod(np.full(4, theta))
    return z + h * (Q @ powers)


def _error_norm(err: np.ndarray, z: np.ndarray, z_new: np.ndarray, cfg: IntegratorConfig) -> float:
    scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(z), np.abs(z_new))
    return float(np.max(np.abs(err) / scale))


def integrate(
    field: VectorField,
    t0: float,
    z0,
    t_end: float,
    config: IntegratorConfig | None = None,
    sample_grid: Sequence[float] | None = None,
    dimension: int | None = None,
    s: Settings | None = None,
) -> Trajectory:
    """
    Integrates z' = field(t, z) from (t0, z0) to t_end.

    Samples are returned at ``sample_grid`` (default: just t0 and t_end) through the
    dense output; t0 and t_end are always included and reproduced exactly.
    """
    s = s or get_settings()
    cfg = config or IntegratorConfig.from_settings(s)
    t0, t_end = float(t0), float(t_end)
    if not t_end > t0:
        raise InvalidParameterError(f"t_end must exceed t0, got t0={t0!r}, t_end={t_end!r}")
    z = np.array(z0, dtype=float).ravel()
    if not np.all(np.isfinite(z)):
        raise NonFiniteError("initial state")

    grid = np.unique(np.concatenate([[t0, t_end], np.asarray(sample_grid if sample_grid is not None else [], dtype=float)]))
    if grid[0] < t0 or grid[-1] > t_end:
        raise InvalidParameterError(f"sample grid must lie inside [{t0}, {t_end}]")

    stats = IntegratorStats()
    dense = DenseOutput()

    def f(t: float, y: np.ndarray) -> np.ndarray:
        stats.evaluations += 1
        return np.asarray(field(t, y), dtype=float)

    samples = [z.copy()]
    next_sample = 1

    K = np.empty((7, z.shape[0]))
    K[0] = f(t0, z)
    if not np.all(np.isfinite(K[0])):
        raise NonFiniteError("vector field", f"vector field is not finite at t0={t0!r}")

    t = t0
    h = min(cfg.initial_step, cfg.max_step, t_end - t0)
    err_prev = 1e-4
    rejected_last = False

    logger.debug(f"Integrating on [{t0}, {t_end}] with {grid.shape[0]} samples, rtol={cfg.rel_tol}, atol={cfg.abs_tol}")

    while t < t_end:
        if stats.accepted + stats.rejected >= cfg.max_steps:
            raise MaxStepsExceededError(t, cfg.max_steps)
        if h < 16.0 * np.spacing(t):
            raise StepSizeUnderflowError(t, h)

        last = t + h >= t_end
        if last:
            h = t_end - t

        for i in range(1, 6):
            K[i] = f(t + C[i] * h, z + h * (A[i] @ K[:i]))
        z_new = z + h * (B @ K[:6])
        t_new = t_end if last else t + h
        K[6] = f(t_new, z_new)

        if not (np.all(np.isfinite(z_new)) and np.all(np.isfinite(K[6]))):
            stats.rejected += 1
            rejected_last = True
            h *= cfg.factor_min
            logger.debug(f"Non-finite trial step at t={t!r}; shrinking to h={h:.3e}")
            continue

        err = _error_norm(h * (E @ K), z, z_new, cfg)

        if err <= 1.0:
            Q = K.T @ P
            while next_sample < grid.shape[0] and grid[next_sample] <= t_new:
                ts = grid[next_sample]
                samples.append(z_new.copy() if ts == t_new else _interpolate(z, Q, h, (ts - t) / h))
                next_sample += 1
            dense.add(t, h, z.copy(), Q)

            stats.accepted += 1
            t, z = t_new, z_new
            K[0] = K[6]

            if err == 0.0:
                factor = cfg.factor_max
            else:
                factor = cfg.safety * err ** (-ALPHA_PI) * err_prev ** BETA_PI
                factor = min(cfg.factor_max, max(cfg.factor_min, factor))
            if rejected_last:
                factor = min(1.0, factor)
            err_prev = max(err, 1e-4)
            rejected_last = False
            h = min(h * factor, cfg.max_step)
        else:
            stats.rejected += 1
            rejected_last = True
            h *= max(cfg.factor_min, cfg.safety * err ** (-0.2))

    logger.debug(f"Integration done: {stats.accepted} accepted, {stats.rejected} rejected, {stats.evaluations} evaluations")

    return Trajectory(
        times=grid,
        states=np.vstack(samples),
        dimension=z.shape[0] if dimension is None else dimension,
        stats=stats,
        dense=dense,
    )


def resample(traj: Trajectory, times: Sequence[float]) -> Trajectory:
    """Dense-output evaluation of a trajectory at arbitrary increasing times."""
    if traj.dense is None:
        raise InvalidParameterError("trajectory carries no dense output")
    times = np.asarray(times, dtype=float)
    states = np.vstack([traj.dense(t) for t in times])
    return Trajectory(times=times, states=states, dimension=traj.dimension, stats=traj.stats,
                      layout=traj.layout, dense=traj.dense)


def resample_uniform(traj: Trajectory, h: float) -> Trajectory:
    """Trajectory on the uniform grid t0, t0 + h, ... inside the integrated span."""
    if not h > 0:
        raise InvalidParameterError(f"resample step must be positive, got {h!r}")
    if traj.dense is None:
        raise InvalidParameterError("trajectory carries no dense output")
    span = traj.dense.t_end - traj.dense.t_start
    if not h < span:
        raise InvalidParameterError(f"resample step {h!r} is not smaller than the span {span!r}")
    count = int(np.floor(span / h * (1.0 + 1e-12))) + 1
    grid = traj.dense.t_start + h * np.arange(count)
    grid = grid[grid <= traj.dense.t_end]
    return resample(traj, grid)
