import logging
import sys
from typing import Sequence

import click
from dotenv import dotenv_values

from .config import get_settings, parse_vector
from .errors import InvalidParameterError
from .logging_config import setup_logging
from .main import process_bench, process_dnshr, process_simulation, process_validation
from .models import DynamicKind
from .services.bench import OPERATOR_NAMES, PLAN_NAMES

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_UNSATISFIED = 3

_S = get_settings()


class VectorType(click.ParamType):
    name = "vector"

    def convert(self, value, param, ctx):
        if isinstance(value, tuple):
            return value
        try:
            vec = parse_vector(str(value))
        except ValueError:
            self.fail(f"{value!r} is not a comma-separated list of numbers", param, ctx)
        if not vec:
            self.fail("empty vector", param, ctx)
        return vec


VECTOR = VectorType()


def _fmt(vec) -> str:
    return ",".join(f"{v:g}" for v in vec)


def config_option(f):
    return click.option(
        "--config", "config_file", type=click.Path(exists=True, dir_okay=False), default=None,
        help="KEY=value file; keys mirror flag names and override flags given on the command line.",
    )(f)


def apply_config(ctx: click.Context, params: dict) -> dict:
    """Merges a --config file into the command's parameters."""
    path = params.pop("config_file", None)
    if path is None:
        return params
    known = {p.name: p for p in ctx.command.params if p.name != "config_file"}
    for raw_key, raw in dotenv_values(path).items():
        key = raw_key.strip().lstrip("-").replace("-", "_").lower()
        if key not in known:
            raise click.UsageError(f"unknown key {raw_key!r} in config file {path}", ctx)
        if raw is None:
            raise click.UsageError(f"key {raw_key!r} in config file {path} has no value", ctx)
        params[key] = known[key].type.convert(raw, known[key], ctx)
    logger.info(f"Applied config file {path}")
    return params


def _report_files(files) -> None:
    for path in files:
        click.echo(str(path))


def _exit_for(result) -> int:
    if result.ok:
        return EXIT_OK
    for r in result.results:
        if r.error:
            click.echo(f"configuration {r.key} failed: {r.error}", err=True)
    return EXIT_FAILURE


@click.group()
@click.option("--log-level", type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
              default=None, help="Console and package log level.")
@click.option("--log-file", type=click.Path(dir_okay=False), default=None, help="JSON log file path.")
@click.option("--json-logs", is_flag=True, help="Emit console logs as JSON.")
@click.option("--no-log-file", is_flag=True, help="Disable the rotating log file.")
def cli(log_level, log_file, json_logs, no_log_file):
    """Simulate smoothed high-resolution inertial dynamics and reproduce the benchmark suite."""
    setup_logging(
        console_level=log_level,
        package_level=log_level,
        log_file=log_file,
        json_console=json_logs,
        file_logging=not no_log_file,
    )


@cli.command()
@click.option("--dynamic", type=click.Choice([k.value for k in DynamicKind]), default=DynamicKind.NSHR.value,
              show_default=True, help="Model to integrate.")
@click.option("--operator", type=click.Choice(OPERATOR_NAMES), default="rotation", show_default=True,
              help="Monotone operator driving hrmmd.")
@click.option("--alpha", type=float, default=_S.ALPHA, show_default=True, help="Viscous damping alpha (dimensionless).")
@click.option("--beta", type=float, default=_S.BETA, show_default=True, help="Hessian-driven damping beta (time units).")
@click.option("--p", type=float, default=_S.P, show_default=True, help="Exponent: delta(t) = t^p.")
@click.option("--c", type=float, default=_S.C, show_default=True, help="Scale: gamma(t) = c t^(p+2).")
@click.option("--t0", type=float, default=_S.T0, show_default=True, help="Start time (time units).")
@click.option("--t-end", type=float, default=_S.T_END, show_default=True, help="End time (time units).")
@click.option("--x0", type=VECTOR, default=_fmt(_S.X0), show_default=True, help="Initial position, comma list.")
@click.option("--v0", type=VECTOR, default=_fmt(_S.V0), show_default=True, help="Initial velocity, comma list.")
@click.option("--abs-tol", type=float, default=_S.ABS_TOL, show_default=True, help="Integrator absolute tolerance.")
@click.option("--rel-tol", type=float, default=_S.REL_TOL, show_default=True, help="Integrator relative tolerance.")
@click.option("--samples", type=click.IntRange(min=2), default=_S.SAMPLES, show_default=True,
              help="Log-spaced sample count.")
@click.option("--out", type=click.Path(file_okay=False), default="results", show_default=True,
              help="Output directory.")
@config_option
@click.pass_context
def simulate(ctx, **params):
    """Integrate one trajectory and export its diagnostics CSV."""
    logger.info("Command invoked: simulate")
    params = apply_config(ctx, params)
    result, files = process_simulation(**params)
    _report_files(files)
    return _exit_for(result)


@cli.command()
@click.option("--plan", "plan_name", type=click.Choice(PLAN_NAMES), required=True, help="Experiment plan.")
@click.option("--out", type=click.Path(file_okay=False), default="results", show_default=True,
              help="Output directory.")
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True,
              help="Configurations integrated concurrently.")
@config_option
@click.pass_context
def bench(ctx, **params):
    """Run an experiment plan and export one CSV per configuration."""
    logger.info("Command invoked: bench")
    params = apply_config(ctx, params)
    result, files = process_bench(params["plan_name"], params["out"], params["workers"])
    _report_files(files)
    return _exit_for(result)


@cli.command()
@click.option("--assumption", type=click.Choice(["B", "D"], case_sensitive=False), required=True,
              help="B: optimisation assumptions; D: monotone-operator assumptions.")
@click.option("--alpha", type=float, default=_S.ALPHA, show_default=True, help="Viscous damping alpha.")
@click.option("--sigma", type=float, default=_S.MONOTONE_SIGMA, show_default=True,
              help="Lyapunov anchor sigma, used by D.")
@click.option("--p", type=float, default=_S.P, show_default=True, help="Exponent: delta(t) = t^p.")
@click.option("--c", type=float, default=_S.C, show_default=True, help="Scale: gamma(t) = c t^(p+2).")
@config_option
@click.pass_context
def validate(ctx, **params):
    """Check a polynomial schedule against an assumption set; exit 3 when unsatisfied."""
    logger.info("Command invoked: validate")
    params = apply_config(ctx, params)
    report = process_validation(**params)
    for line in report.to_lines():
        click.echo(line)
    return EXIT_OK if report.satisfied else EXIT_UNSATISFIED


@cli.command()
@click.option("--h", type=float, default=_S.DNSHR_H, show_default=True, help="Step size (time units).")
@click.option("--n", type=click.IntRange(min=2), default=_S.DNSHR_N, show_default=True, help="Iteration budget.")
@click.option("--alpha", type=float, default=_S.ALPHA, show_default=True, help="Viscous damping alpha.")
@click.option("--beta", type=float, default=_S.BETA, show_default=True, help="Hessian-driven damping beta.")
@click.option("--p", type=float, default=_S.P, show_default=True, help="Exponent: delta(t) = t^p.")
@click.option("--c", type=float, default=_S.C, show_default=True, help="Scale: gamma(t) = c t^(p+2).")
@click.option("--x0", type=VECTOR, default=_fmt(_S.X0), show_default=True, help="Initial iterates x0 = x1.")
@click.option("--out", type=click.Path(file_okay=False), default="results", show_default=True,
              help="Output directory.")
@config_option
@click.pass_context
def dnshr(ctx, **params):
    """Run the proximal discretisation and export its iterate diagnostics."""
    logger.info("Command invoked: dnshr")
    params = apply_config(ctx, params)
    result, files = process_dnshr(**params)
    _report_files(files)
    return _exit_for(result)


def parse_and_dispatch(argv: Sequence[str] | None = None, command: click.Group | None = None) -> int:
    """Runs the CLI and returns the process exit code instead of exiting."""
    command = command or cli
    try:
        rv = command.main(args=list(argv) if argv is not None else None, prog_name="nshr", standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.exceptions.Abort:
        click.echo("Aborted!", err=True)
        return EXIT_FAILURE
    except InvalidParameterError as e:
        # parameter and config checks fail before any integration starts
        click.echo(f"Error: {e}", err=True)
        return EXIT_USAGE
    except Exception:
        logger.exception("Unhandled exception during command processing.")
        click.echo("Error: command failed; see the log for the traceback.", err=True)
        return EXIT_FAILURE
    return EXIT_OK if rv is None else int(rv)


def main() -> None:
    sys.exit(parse_and_dispatch(sys.argv[1:]))
