"""Experiment plans, their execution and the CSV / metadata outputs."""
import csv
import logging
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from ..config import get_settings, Settings
from ..errors import InsufficientSamplesError, InvalidParameterError
from ..models import (
    CSV_COLUMNS,
    ConfigurationResult,
    DiagnosticsSeries,
    DynamicKind,
    DynamicSpec,
    ExperimentPlan,
    IntegratorConfig,
    IntegratorStats,
    PlanConfiguration,
    RunResult,
)
from .dnshr import dnshr_config, dnshr_diagnostics, dnshr_run
from .dynamics import simulate
from .lyapunov import diagnostics, fit_rate, oscillation_metric
from .monotone import SubdifferentialOperator, rotation_operator
from .proxcore import TestObjective
from .schedules import PolynomialSchedule, PowerLawSchedule

logger = logging.getLogger(__name__)

PLAN_NAMES = ("vary_beta", "vary_alpha", "compare", "monotone_demo", "dnshr_demo")
OPERATOR_NAMES = ("rotation", "subdifferential")
METADATA_FILE = "run_metadata.txt"


def _key(prefix: str, value: float) -> str:
    return f"{prefix}_{value:g}"


def make_operator(name: str, objective=None):
    if name == "rotation":
        return rotation_operator()
    if name == "subdifferential":
        return SubdifferentialOperator(objective or TestObjective())
    raise InvalidParameterError(f"unknown operator {name!r}; expected one of {OPERATOR_NAMES}")


def build_spec(
    kind: DynamicKind | str,
    alpha: float | None = None,
    beta: float | None = None,
    p: float | None = None,
    c: float | None = None,
    t0: float | None = None,
    operator: str = "rotation",
    s: Settings | None = None,
) -> DynamicSpec:
    """
    A dynamic over the test objective. NSHR, HRMMD and the baselines use
    delta = t^p, gamma = c t^(p+2); the two benchmark dynamics always use their
    published time functions from the constants table.
    """
    s = s or get_settings()
    kind = DynamicKind(kind)
    alpha = s.ALPHA if alpha is None else alpha
    t0 = s.T0 if t0 is None else t0
    p = s.P if p is None else p
    c = s.C if c is None else c

    if kind is DynamicKind.ATTOUCH_LASZLO:
        schedule = PolynomialSchedule(0.0, s.AL_LAMBDA, t0)
        beta = s.AL_BETA if beta is None else beta
    elif kind is DynamicKind.BOT_KARAPETYANTS:
        schedule = PowerLawSchedule(s.BK_B_SCALE, s.BK_B_POWER, s.BK_LAMBDA_SCALE, s.BK_LAMBDA_POWER, t0)
        beta = s.BK_BETA if beta is None else beta
    else:
        schedule = PolynomialSchedule(p, c, t0)
        beta = s.BETA if beta is None else beta

    driver = make_operator(operator) if kind is DynamicKind.HRMMD else TestObjective()
    return DynamicSpec(kind=kind, alpha=alpha, beta=beta, schedule=schedule, driver=driver, t0=t0)


def build_plan(name: str, s: Settings | None = None) -> ExperimentPlan:
    s = s or get_settings()
    if name == "vary_beta":
        configurations = [
            PlanConfiguration(
                _key("beta", beta),
                build_spec(DynamicKind.NSHR, s.ALPHA, beta, s.P, s.C, s=s),
                parameters={"dynamic": "nshr", "alpha": s.ALPHA, "beta": beta, "p": s.P, "c": s.C},
            )
            for beta in s.VARY_BETA_VALUES
        ]
    elif name == "vary_alpha":
        configurations = []
        for alpha in s.VARY_ALPHA_VALUES:
            p = s.vary_alpha_p(alpha)
            configurations.append(PlanConfiguration(
                _key("alpha", alpha),
                build_spec(DynamicKind.NSHR, alpha, s.BETA, p, s.VARY_ALPHA_C, s=s),
                parameters={"dynamic": "nshr", "alpha": alpha, "beta": s.BETA, "p": p, "c": s.VARY_ALPHA_C},
            ))
    elif name == "compare":
        shared = {"alpha": s.ALPHA, "beta": s.BETA, "p": s.P, "c": s.COMPARE_C}
        configurations = [
            PlanConfiguration(
                key.replace("-", "_"),
                build_spec(key, s.ALPHA, s.BETA, s.P, s.COMPARE_C, s=s),
                parameters={"dynamic": key, **shared},
            )
            for key in ("nshr", "baseline-delta", "baseline-unit")
        ]
        configurations.append(PlanConfiguration(
            "al",
            build_spec(DynamicKind.ATTOUCH_LASZLO, s.ALPHA, s=s),
            parameters={"dynamic": "al", "alpha": s.ALPHA, "beta": s.AL_BETA, "lambda": s.AL_LAMBDA},
        ))
        configurations.append(PlanConfiguration(
            "bk",
            build_spec(DynamicKind.BOT_KARAPETYANTS, s.ALPHA, s=s),
            parameters={
                "dynamic": "bk", "alpha": s.ALPHA, "beta": s.BK_BETA,
                "b_scale": s.BK_B_SCALE, "b_power": s.BK_B_POWER,
                "lambda_scale": s.BK_LAMBDA_SCALE, "lambda_power": s.BK_LAMBDA_POWER,
            },
        ))
    elif name == "monotone_demo":
        # no published counterpart: Assumption-D schedule, c twice the threshold
        configurations = [
            PlanConfiguration(
                operator,
                build_spec(DynamicKind.HRMMD, s.MONOTONE_ALPHA, s.MONOTONE_BETA, s.MONOTONE_P, s.monotone_c,
                           operator=operator, s=s),
                parameters={
                    "dynamic": "hrmmd", "operator": operator, "alpha": s.MONOTONE_ALPHA,
                    "beta": s.MONOTONE_BETA, "p": s.MONOTONE_P, "c": s.monotone_c, "sigma": s.MONOTONE_SIGMA,
                },
            )
            for operator in OPERATOR_NAMES
        ]
    elif name == "dnshr_demo":
        configurations = [PlanConfiguration(
            "dnshr",
            dnshr=dnshr_config(s=s),
            parameters={
                "dynamic": "dnshr", "h": s.DNSHR_H, "n": s.DNSHR_N, "alpha": s.ALPHA,
                "beta": s.BETA, "p": s.P, "c": s.C,
            },
        )]
    else:
        raise InvalidParameterError(f"unknown plan {name!r}; expected one of {PLAN_NAMES}")

    return ExperimentPlan(
        name=name,
        configurations=configurations,
        t0=s.T0,
        t_end=s.T_END,
        x0=s.X0,
        v0=s.V0,
        samples=s.SAMPLES,
        integrator=IntegratorConfig.from_settings(s),
        rate_window=s.RATE_WINDOW,
        oscillation_window=s.OSCILLATION_WINDOW,
    )


def _rate(series: DiagnosticsSeries, column: str, window) -> tuple[float | None, bool]:
    values = getattr(series, column)
    if np.all(np.isnan(values)):
        return None, False
    try:
        return fit_rate(series.t, values, window), False
    except InsufficientSamplesError as e:
        logger.info(f"No {column} rate: {e}")
        return None, e.floor_hit


def _run_configuration(plan: ExperimentPlan, conf: PlanConfiguration, s: Settings) -> ConfigurationResult:
    result = ConfigurationResult(key=conf.key, parameters=dict(conf.parameters))
    started = time.perf_counter()
    try:
        if conf.dnshr is not None:
            history = dnshr_run(conf.dnshr, plan.x0, plan.x0)
            series = dnshr_diagnostics(conf.dnshr, history)
            result.stats = IntegratorStats(accepted=len(history))
            result.parameters["stop_reason"] = history.stop_reason
        else:
            traj = simulate(conf.spec, plan.x0, plan.v0, plan.t_end, plan.integrator, plan.sample_grid(), s=s)
            series = diagnostics(conf.spec, traj)
            result.stats = traj.stats
        result.series = series

        result.obj_rate, obj_floor = _rate(series, "obj_gap", plan.rate_window)
        result.grad_rate, grad_floor = _rate(series, "grad_norm", plan.rate_window)
        result.floor_hit = obj_floor or grad_floor

        watched = series.grad_norm if np.all(np.isnan(series.obj_gap)) else series.obj_gap
        try:
            result.oscillation = oscillation_metric(series.t, watched, plan.oscillation_window)
        except InsufficientSamplesError as e:
            logger.info(f"No oscillation metric for {conf.key}: {e}")
    except Exception as e:
        logger.exception(f"Configuration {conf.key} of plan {plan.name} failed")
        result.error = f"{type(e).__name__}: {e}"
    result.wall_clock = time.perf_counter() - started
    logger.info(f"Configuration {conf.key} done in {result.wall_clock:.2f}s (ok={result.ok})")
    return result


def run_plan(plan: ExperimentPlan, workers: int = 1, s: Settings | None = None) -> RunResult:
    """Runs every configuration; results are ordered by configuration key."""
    s = s or get_settings()
    logger.info(f"Running plan {plan.name} with {len(plan.configurations)} configurations on {workers} worker(s)")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda conf: _run_configuration(plan, conf, s), plan.configurations))
    else:
        results = [_run_configuration(plan, conf, s) for conf in plan.configurations]
    results.sort(key=lambda r: r.key)
    return RunResult(plan=plan, results=results)


def format_number(value: float) -> str:
    return f"{float(value):.16e}"


def write_series_csv(series: DiagnosticsSeries, path: Path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in series.rows():
            writer.writerow([format_number(v) for v in row])
    return path


def read_series_csv(path: Path) -> DiagnosticsSeries:
    path = Path(path)
    with path.open("r", newline="", encoding="utf8") as f:
        reader = csv.reader(f)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise InvalidParameterError(f"{path}: unexpected header {header}")
        rows = np.array([[float(v) for v in row] for row in reader], dtype=float).reshape(-1, len(CSV_COLUMNS))
    col = {name: rows[:, i] for i, name in enumerate(CSV_COLUMNS)}
    return DiagnosticsSeries(
        t=col["t"],
        obj_gap=col["obj_gap"],
        env_gap=col["env_gap"],
        grad_norm=col["grad_norm"],
        x_norm=col["x_norm"],
        x=np.column_stack([col["x1"], col["x2"]]),
        t_xdot_norm=col["t_xdot_norm"],
        rel_obj=col["rel_obj"],
        rel_grad=col["rel_grad"],
        lyapunov=col["lyapunov"],
    )


def version_string() -> str:
    from .. import __version__

    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return __version__
    described = out.stdout.strip()
    if out.returncode != 0 or not described:
        return __version__
    return f"{__version__}+{described}"


def metadata_lines(result: RunResult) -> list[str]:
    """key=value lines; wall-clock times are left out so reruns are byte-identical."""
    lines = [f"version={version_string()}"]
    lines += [f"{key}={value}" for key, value in result.plan.describe().items()]
    for r in result.results:
        for key, value in r.parameters.items():
            lines.append(f"{r.key}.{key}={value}")
        lines.append(f"{r.key}.ok={str(r.ok).lower()}")
        if r.error:
            lines.append(f"{r.key}.error={r.error}")
        for key in ("obj_rate", "grad_rate", "oscillation"):
            value = getattr(r, key)
            lines.append(f"{r.key}.{key}={'none' if value is None else repr(value)}")
        lines.append(f"{r.key}.floor_hit={str(r.floor_hit).lower()}")
        if r.stats is not None:
            for key, value in r.stats.to_dict().items():
                lines.append(f"{r.key}.{key}={value}")
    return lines


def export_csv(result: RunResult, path) -> list[Path]:
    """One ``{key}.csv`` per successful configuration plus the run metadata file."""
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = [
            write_series_csv(r.series, out / f"{r.key}.csv")
            for r in result.results
            if r.series is not None
        ]
        meta = out / METADATA_FILE
        meta.write_text("\n".join(metadata_lines(result)) + "\n", encoding="utf8")
    except OSError as e:
        logger.error(f"Could not write results to {out}: {e}")
        raise
    written.append(meta)
    logger.info(f"Wrote {len(written)} files to {out}")
    return written
