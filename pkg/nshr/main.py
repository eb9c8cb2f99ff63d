import logging
from pathlib import Path
from typing import Sequence

from .config import get_settings, Settings
from .models import (
    AssumptionReport,
    DynamicKind,
    ExperimentPlan,
    IntegratorConfig,
    PlanConfiguration,
    RunResult,
)
from .services.bench import build_plan, build_spec, export_csv, run_plan
from .services.dnshr import dnshr_config
from .services.schedules import PolynomialSchedule, validate_assumption_B, validate_assumption_D

logger = logging.getLogger(__name__)


def _single_plan(name: str, conf: PlanConfiguration, s: Settings, **overrides) -> ExperimentPlan:
    values = dict(
        t0=s.T0, t_end=s.T_END, x0=s.X0, v0=s.V0, samples=s.SAMPLES,
        integrator=IntegratorConfig.from_settings(s),
        rate_window=s.RATE_WINDOW, oscillation_window=s.OSCILLATION_WINDOW,
    )
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentPlan(name=name, configurations=[conf], **values)


def process_simulation(
    dynamic: str,
    out: str | Path,
    alpha: float | None = None,
    beta: float | None = None,
    p: float | None = None,
    c: float | None = None,
    t0: float | None = None,
    t_end: float | None = None,
    x0: Sequence[float] | None = None,
    v0: Sequence[float] | None = None,
    abs_tol: float | None = None,
    rel_tol: float | None = None,
    samples: int | None = None,
    operator: str = "rotation",
    s: Settings | None = None,
) -> tuple[RunResult, list[Path]]:
    """
    Runs one trajectory and exports its diagnostics.

    Returns the run result and the files written; a failed integration is
    recorded in the result, not raised.
    """
    s = s or get_settings()
    kind = DynamicKind(dynamic)
    spec = build_spec(kind, alpha, beta, p, c, t0, operator=operator, s=s)

    parameters = {"dynamic": kind.value, "alpha": spec.alpha, "beta": spec.beta, **spec.schedule.describe()}
    if kind is DynamicKind.HRMMD:
        parameters["operator"] = operator
    conf = PlanConfiguration(kind.value.replace("-", "_"), spec, parameters=parameters)

    plan = _single_plan(
        "simulate", conf, s,
        t0=spec.t0, t_end=t_end,
        x0=None if x0 is None else tuple(x0),
        v0=None if v0 is None else tuple(v0),
        samples=samples,
        integrator=IntegratorConfig.from_settings(s, abs_tol=abs_tol, rel_tol=rel_tol),
    )
    result = run_plan(plan, s=s)
    return result, export_csv(result, out)


def process_bench(plan_name: str, out: str | Path, workers: int = 1, s: Settings | None = None) -> tuple[RunResult, list[Path]]:
    s = s or get_settings()
    plan = build_plan(plan_name, s)
    result = run_plan(plan, workers=workers, s=s)
    return result, export_csv(result, out)


def process_validation(
    assumption: str,
    alpha: float,
    p: float,
    c: float,
    sigma: float | None = None,
    s: Settings | None = None,
) -> AssumptionReport:
    s = s or get_settings()
    sched = PolynomialSchedule(p, c, s.T0)
    if assumption.upper() == "B":
        return validate_assumption_B(sched, alpha, s)
    if sigma is None:
        sigma = s.MONOTONE_SIGMA
    return validate_assumption_D(sched, alpha, sigma, s)


def process_dnshr(
    out: str | Path,
    h: float | None = None,
    n: int | None = None,
    alpha: float | None = None,
    beta: float | None = None,
    p: float | None = None,
    c: float | None = None,
    x0: Sequence[float] | None = None,
    s: Settings | None = None,
) -> tuple[RunResult, list[Path]]:
    s = s or get_settings()
    config = dnshr_config(h, n, alpha, beta, p, c, s=s)
    parameters = {
        "dynamic": "dnshr", "h": config.h, "n": config.max_iterations,
        "alpha": config.alpha, "beta": config.beta, **config.schedule.describe(),
    }
    conf = PlanConfiguration("dnshr", dnshr=config, parameters=parameters)
    plan = _single_plan("dnshr", conf, s, x0=None if x0 is None else tuple(x0))
    result = run_plan(plan, s=s)
    return result, export_csv(result, out)
