from enum import Enum
from dataclasses import dataclass, field, asdict
from typing import Any, Callable, TYPE_CHECKING

import numpy as np

from .errors import InvalidParameterError

if TYPE_CHECKING:
    from .services.schedules import ParameterSchedule


class DynamicKind(str, Enum):
    NSHR = "nshr"
    HRMMD = "hrmmd"
    BASELINE_DELTA = "baseline-delta"
    BASELINE_UNIT = "baseline-unit"
    ATTOUCH_LASZLO = "al"
    BOT_KARAPETYANTS = "bk"


class StateLayout(str, Enum):
    # (x, y) pair of the exact first-order reformulation, NSHR with beta > 0 only
    XY = "xy"
    # (x, v) with v = xdot + c(t) g(t, x), every kind
    SHIFT = "shift"


@dataclass(frozen=True)
class DynamicSpec:
    """
    A fully parameterised continuous model.

    ``schedule`` carries delta(t) and gamma(t). For the benchmark kinds it carries
    their analogues: AttouchLaszlo reads only gamma = lambda(t); BotKarapetyants
    reads delta = b(t) and gamma = lambda(t). ``beta`` may be a callable only to be
    rejected by the vector fields (time-varying beta is unsupported).
    """
    kind: DynamicKind
    alpha: float
    beta: float | Callable[[float], float]
    schedule: "ParameterSchedule"
    driver: Any
    t0: float = 1.0

    def __post_init__(self):
        if not isinstance(self.kind, DynamicKind):
            object.__setattr__(self, "kind", DynamicKind(self.kind))
        if not self.alpha > 0:
            raise InvalidParameterError(f"alpha must be positive, got {self.alpha!r}")
        if not self.t0 > 0:
            raise InvalidParameterError(f"t0 must be positive, got {self.t0!r}")
        if self.schedule.t0 > self.t0:
            raise InvalidParameterError(
                f"schedule starts at {self.schedule.t0!r}, after the dynamic's t0={self.t0!r}"
            )
        if not callable(self.beta) and self.beta < 0:
            raise InvalidParameterError(f"beta must be nonnegative, got {self.beta!r}")
        if self.kind is DynamicKind.HRMMD:
            if not hasattr(self.driver, "resolvent"):
                raise InvalidParameterError("HRMMD needs a monotone operator driver")
        elif not hasattr(self.driver, "prox"):
            raise InvalidParameterError(f"{self.kind.value} needs a prox objective driver")

    @property
    def dimension(self) -> int:
        return self.driver.dimension

    @property
    def beta_constant(self) -> bool:
        return not callable(self.beta)

    def describe(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "alpha": self.alpha,
            "beta": self.beta if self.beta_constant else "callable",
            "t0": self.t0,
            "schedule": self.schedule.describe(),
            "driver": type(self.driver).__name__,
        }


@dataclass
class IntegratorConfig:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    initial_step: float = 1e-4
    max_step: float = float("inf")
    max_steps: int = 2_000_000
    safety: float = 0.9
    factor_min: float = 0.2
    factor_max: float = 5.0

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise InvalidParameterError("integrator tolerances must be positive")
        if not (self.initial_step > 0 and self.max_step > 0):
            raise InvalidParameterError("integrator step sizes must be positive")
        if self.max_steps < 1:
            raise InvalidParameterError("max_steps must be at least 1")
        if not 0 < self.factor_min < 1 < self.factor_max:
            raise InvalidParameterError("step factor clamp must satisfy 0 < min < 1 < max")

    @classmethod
    def from_settings(cls, s, **overrides) -> "IntegratorConfig":
        values = dict(
            abs_tol=s.ABS_TOL,
            rel_tol=s.REL_TOL,
            initial_step=s.INITIAL_STEP,
            max_steps=s.MAX_STEPS,
            safety=s.PI_SAFETY,
            factor_min=s.FACTOR_MIN,
            factor_max=s.FACTOR_MAX,
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class IntegratorStats:
    accepted: int = 0
    rejected: int = 0
    evaluations: int = 0

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class Trajectory:
    """Sampled first-order states. ``dimension`` is the size of x inside each state."""
    times: np.ndarray
    states: np.ndarray
    dimension: int
    stats: IntegratorStats = field(default_factory=IntegratorStats)
    layout: StateLayout | None = None
    velocities: np.ndarray | None = None
    # integrate.DenseOutput; continuous extension between samples
    dense: Any = field(default=None, repr=False)

    def __post_init__(self):
        if self.times.ndim != 1 or self.states.shape[0] != self.times.shape[0]:
            raise InvalidParameterError("times and states must have matching lengths")
        if self.times.shape[0] > 1 and not np.all(np.diff(self.times) > 0):
            raise InvalidParameterError("trajectory times must be strictly increasing")

    @property
    def positions(self) -> np.ndarray:
        return self.states[:, :self.dimension]

    @property
    def auxiliary(self) -> np.ndarray:
        return self.states[:, self.dimension:]

    def __len__(self) -> int:
        return self.times.shape[0]


CSV_COLUMNS = (
    "t", "obj_gap", "env_gap", "grad_norm", "x_norm", "x1", "x2",
    "t_xdot_norm", "rel_obj", "rel_grad", "lyapunov",
)


@dataclass
class DiagnosticsSeries:
    """Per-sample monitored quantities; NaN marks a column that does not apply."""
    t: np.ndarray
    obj_gap: np.ndarray
    env_gap: np.ndarray
    grad_norm: np.ndarray
    x_norm: np.ndarray
    x: np.ndarray
    t_xdot_norm: np.ndarray
    rel_obj: np.ndarray
    rel_grad: np.ndarray
    lyapunov: np.ndarray

    def __len__(self) -> int:
        return self.t.shape[0]

    def column(self, name: str) -> np.ndarray:
        if name in ("x1", "x2"):
            i = int(name[1:]) - 1
            if i < self.x.shape[1]:
                return self.x[:, i]
            return np.full(self.t.shape, np.nan)
        return getattr(self, name)

    def rows(self):
        for k in range(len(self)):
            yield tuple(float(self.column(name)[k]) for name in CSV_COLUMNS)


@dataclass
class ConditionVerdict:
    name: str
    satisfied: bool
    value: float
    bound: float | None = None
    note: str = ""


@dataclass
class AssumptionReport:
    assumption: str
    method: str  # "analytic" for the polynomial family, "grid" otherwise
    verdicts: list[ConditionVerdict]
    margins: dict[str, float] = field(default_factory=dict)
    zeta: float | None = None
    M: float | None = None
    threshold: float | None = None
    limit: float | None = None

    @property
    def satisfied(self) -> bool:
        return all(v.satisfied for v in self.verdicts)

    def verdict(self, name: str) -> ConditionVerdict:
        for v in self.verdicts:
            if v.name == name:
                return v
        raise KeyError(name)

    def to_lines(self) -> list[str]:
        lines = [
            f"assumption={self.assumption}",
            f"method={self.method}",
            f"satisfied={str(self.satisfied).lower()}",
        ]
        for v in self.verdicts:
            lines.append(f"condition_{v.name}={str(v.satisfied).lower()}")
            lines.append(f"condition_{v.name}_value={v.value!r}")
            if v.bound is not None:
                lines.append(f"condition_{v.name}_bound={v.bound!r}")
        for key in ("zeta", "M", "threshold", "limit"):
            value = getattr(self, key)
            if value is not None:
                lines.append(f"{key}={value!r}")
        for key, value in sorted(self.margins.items()):
            lines.append(f"margin_{key}={value!r}")
        return lines


@dataclass(frozen=True)
class DnshrConfig:
    h: float
    alpha: float
    beta: float
    schedule: "ParameterSchedule"
    objective: Any
    max_iterations: int = 20000
    stop_threshold: float = 1e-10
    divergence_factor: float = 1e6

    def __post_init__(self):
        if not self.h > 0:
            raise InvalidParameterError(f"step size h must be positive, got {self.h!r}")
        if self.max_iterations < 2:
            raise InvalidParameterError("max_iterations must be at least 2")
        if self.schedule.t0 > self.h:
            raise InvalidParameterError(
                f"schedule must be defined from t = h = {self.h!r}, it starts at {self.schedule.t0!r}"
            )
        if self.beta < 0:
            raise InvalidParameterError(f"beta must be nonnegative, got {self.beta!r}")


@dataclass(frozen=True)
class StepRecord:
    """Intermediates of one implicit step, kept for residual checks."""
    t_next: float
    r: np.ndarray
    u: np.ndarray
    lam: float
    s: float
    g_next: np.ndarray
    implicit_residual: float
    gradient_mismatch: float


@dataclass(frozen=True)
class DiscreteState:
    k: int
    x: np.ndarray
    x_prev: np.ndarray
    g_prev: np.ndarray
    delta_prev: float
    record: StepRecord | None = None

    def __post_init__(self):
        if self.k < 1:
            raise InvalidParameterError(f"step index must be at least 1, got {self.k}")
        for name in ("x", "x_prev", "g_prev"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise InvalidParameterError(f"{name} has non-finite entries")


@dataclass
class DnshrHistory:
    ks: np.ndarray
    times: np.ndarray
    iterates: np.ndarray
    proxes: np.ndarray
    gaps: np.ndarray
    grad_norms: np.ndarray
    implicit_residuals: np.ndarray
    gradient_mismatches: np.ndarray
    stop_reason: str

    def __len__(self) -> int:
        return self.ks.shape[0]


@dataclass(frozen=True)
class PlanConfiguration:
    """One run of a plan: ``key`` names it in results and in file names."""
    key: str
    spec: DynamicSpec | None = None
    dnshr: DnshrConfig | None = None
    parameters: dict[str, Any] = field(default_factory=dict)


@dataclass
class ExperimentPlan:
    name: str
    configurations: list[PlanConfiguration]
    t0: float = 1.0
    t_end: float = 50.0
    x0: tuple[float, ...] = (20.0, -15.0)
    v0: tuple[float, ...] = (0.0, 0.0)
    samples: int = 600
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    rate_window: tuple[float, float] = (20.0, 50.0)
    oscillation_window: tuple[float, float] = (1.0, 50.0)

    def __post_init__(self):
        keys = [c.key for c in self.configurations]
        if len(set(keys)) != len(keys):
            raise InvalidParameterError(f"duplicate configuration keys in plan {self.name}: {keys}")
        if not self.t_end > self.t0 > 0:
            raise InvalidParameterError("plan horizon must satisfy 0 < t0 < t_end")
        if self.samples < 2:
            raise InvalidParameterError("a plan needs at least two samples")

    def sample_grid(self) -> np.ndarray:
        grid = np.geomspace(self.t0, self.t_end, self.samples)
        grid[0], grid[-1] = self.t0, self.t_end
        return grid

    def describe(self) -> dict[str, Any]:
        return {
            "plan": self.name,
            "t0": self.t0,
            "t_end": self.t_end,
            "x0": ",".join(repr(v) for v in self.x0),
            "v0": ",".join(repr(v) for v in self.v0),
            "samples": self.samples,
            "rate_window": ",".join(repr(v) for v in self.rate_window),
            "oscillation_window": ",".join(repr(v) for v in self.oscillation_window),
            **{f"integrator_{k}": v for k, v in self.integrator.to_dict().items()},
        }


@dataclass
class ConfigurationResult:
    key: str
    parameters: dict[str, Any]
    series: DiagnosticsSeries | None = None
    stats: IntegratorStats | None = None
    obj_rate: float | None = None
    grad_rate: float | None = None
    oscillation: float | None = None
    floor_hit: bool = False
    wall_clock: float = 0.0
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class RunResult:
    plan: ExperimentPlan
    results: list[ConfigurationResult]

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)

    def get(self, key: str) -> ConfigurationResult:
        for r in self.results:
            if r.key == key:
                return r
        raise KeyError(key)

    def keys(self) -> list[str]:
        return [r.key for r in self.results]
