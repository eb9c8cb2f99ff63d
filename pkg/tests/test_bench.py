import numpy as np
import pytest

from nshr.errors import InvalidParameterError
from nshr.models import CSV_COLUMNS, DynamicKind, DynamicSpec, ExperimentPlan, PlanConfiguration
from nshr.services.bench import (
    METADATA_FILE,
    PLAN_NAMES,
    build_plan,
    build_spec,
    export_csv,
    format_number,
    make_operator,
    metadata_lines,
    read_series_csv,
    run_plan,
    write_series_csv,
)
from nshr.services.dnshr import dnshr_config
from nshr.services.lyapunov import diagnostics
from nshr.services.dynamics import simulate
from nshr.services.proxcore import TestObjective
from nshr.services.schedules import PolynomialSchedule


@pytest.mark.parametrize("name, keys", [
    ("vary_beta", ["beta_0.01", "beta_0.08", "beta_0.8", "beta_1.5"]),
    ("vary_alpha", ["alpha_4", "alpha_5", "alpha_6", "alpha_8"]),
    ("compare", ["nshr", "baseline_delta", "baseline_unit", "al", "bk"]),
    ("monotone_demo", ["rotation", "subdifferential"]),
    ("dnshr_demo", ["dnshr"]),
])
def test_plan_configurations(name, keys, settings):
    plan = build_plan(name, s=settings)
    assert [c.key for c in plan.configurations] == keys
    assert plan.t0 == settings.T0 and plan.t_end == settings.T_END
    assert plan.samples == settings.SAMPLES


def test_every_named_plan_builds(settings):
    for name in PLAN_NAMES:
        assert build_plan(name, s=settings).name == name


def test_vary_alpha_couples_the_schedule_to_alpha(settings):
    plan = build_plan("vary_alpha", s=settings)
    for conf in plan.configurations:
        assert conf.parameters["p"] == pytest.approx(conf.parameters["alpha"] - 3.5)
        assert conf.spec.schedule.p == pytest.approx(conf.parameters["p"])


def test_compare_uses_the_benchmark_time_functions(settings):
    plan = build_plan("compare", s=settings)
    kinds = {c.key: c.spec.kind for c in plan.configurations}
    assert kinds["al"] is DynamicKind.ATTOUCH_LASZLO
    assert kinds["bk"] is DynamicKind.BOT_KARAPETYANTS
    assert plan.configurations[0].parameters["c"] == pytest.approx(1e-4)


def test_unknown_names_are_rejected(settings):
    with pytest.raises(InvalidParameterError):
        build_plan("everything", s=settings)
    with pytest.raises(InvalidParameterError):
        make_operator("skew")


def test_format_number_keeps_every_digit():
    assert format_number(0.1) == "1.0000000000000001e-01"
    assert float(format_number(2.0 / 3.0)) == 2.0 / 3.0
    assert format_number(float("nan")) == "nan"


def test_series_csv_round_trip(nshr_spec, tmp_path):
    traj = simulate(nshr_spec, t_end=3.0, sample_grid=np.geomspace(1.0, 3.0, 25))
    series = diagnostics(nshr_spec, traj)
    path = write_series_csv(series, tmp_path / "nshr.csv")

    assert path.read_text(encoding="utf8").splitlines()[0] == ",".join(CSV_COLUMNS)
    back = read_series_csv(path)
    for name in CSV_COLUMNS:
        np.testing.assert_array_equal(back.column(name), series.column(name))


def test_reading_a_foreign_csv_fails(tmp_path):
    path = tmp_path / "other.csv"
    path.write_text("a,b\n1,2\n", encoding="utf8")
    with pytest.raises(InvalidParameterError):
        read_series_csv(path)


def _small_plan(settings, *extra):
    configurations = [
        PlanConfiguration("nshr", build_spec(DynamicKind.NSHR, s=settings), parameters={"dynamic": "nshr"}),
        PlanConfiguration("baseline_unit", build_spec(DynamicKind.BASELINE_UNIT, s=settings), parameters={"dynamic": "baseline-unit"}),
        *extra,
    ]
    return ExperimentPlan(name="small", configurations=configurations, t_end=4.0, samples=40)


def test_run_plan_orders_results_and_fills_them(settings):
    result = run_plan(_small_plan(settings), s=settings)
    assert result.ok
    assert result.keys() == ["baseline_unit", "nshr"]
    nshr = result.get("nshr")
    assert len(nshr.series) == 40
    assert nshr.stats.accepted > 0
    assert nshr.oscillation is not None and nshr.oscillation >= 0.0
    # rate window lies past the short horizon
    assert nshr.obj_rate is None and not nshr.floor_hit


def test_failed_configuration_is_recorded(settings, tmp_path):
    broken = DynamicSpec(DynamicKind.NSHR, 4.0, lambda t: 1.0, PolynomialSchedule(0.5, 0.01), TestObjective())
    result = run_plan(_small_plan(settings, PlanConfiguration("broken", broken)), s=settings)
    failed = result.get("broken")
    assert not result.ok
    assert failed.series is None
    assert failed.error.startswith("UnsupportedDynamicError")
    assert result.get("nshr").ok

    files = export_csv(result, tmp_path)
    assert sorted(p.name for p in files) == ["baseline_unit.csv", "nshr.csv", METADATA_FILE]
    meta = (tmp_path / METADATA_FILE).read_text(encoding="utf8").splitlines()
    assert "broken.ok=false" in meta
    assert any(line.startswith("broken.error=UnsupportedDynamicError") for line in meta)


def test_metadata_lines_are_key_value(settings):
    lines = metadata_lines(run_plan(_small_plan(settings), s=settings))
    assert lines[0].startswith("version=")
    assert "plan=small" in lines
    assert "nshr.dynamic=nshr" in lines
    assert "nshr.ok=true" in lines
    assert not any("wall_clock" in line for line in lines)


def test_reruns_are_byte_identical(settings, tmp_path):
    plan = _small_plan(settings)
    first = export_csv(run_plan(plan, s=settings), tmp_path / "first")
    second = export_csv(run_plan(plan, workers=2, s=settings), tmp_path / "second")
    assert [p.name for p in first] == [p.name for p in second]
    for a, b in zip(first, second):
        assert a.read_bytes() == b.read_bytes()


def test_dnshr_configuration_runs_inside_a_plan(settings):
    conf = PlanConfiguration("dnshr", dnshr=dnshr_config(n=30, s=settings), parameters={"dynamic": "dnshr"})
    result = run_plan(ExperimentPlan(name="discrete", configurations=[conf]), s=settings)
    r = result.get("dnshr")
    assert r.ok
    assert r.parameters["stop_reason"] == "max_iterations"
    assert r.stats.accepted == 30
    assert len(r.series) == 30


@pytest.mark.slow
def test_vary_beta_export_geometry(settings, tmp_path):
    result = run_plan(build_plan("vary_beta", s=settings), workers=4, s=settings)
    assert result.ok
    files = export_csv(result, tmp_path)
    csvs = [p for p in files if p.suffix == ".csv"]
    assert sorted(p.name for p in csvs) == ["beta_0.01.csv", "beta_0.08.csv", "beta_0.8.csv", "beta_1.5.csv"]
    assert (tmp_path / METADATA_FILE).exists()
    for path in csvs:
        lines = path.read_text(encoding="utf8").splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert len(lines) == settings.SAMPLES + 1


@pytest.mark.slow
def test_gradient_rate_sharpens_with_alpha(settings):
    result = run_plan(build_plan("vary_alpha", s=settings), workers=4, s=settings)
    assert result.ok
    runs = sorted(result.results, key=lambda r: r.parameters["alpha"])
    rates = [r.grad_rate for r in runs]
    for r in runs:
        assert r.grad_rate <= -(r.parameters["alpha"] - 1.5) + 0.4
    assert all(later < earlier for earlier, later in zip(rates, rates[1:]))


@pytest.mark.slow
def test_nshr_ends_with_the_smallest_relative_gradient(settings):
    result = run_plan(build_plan("compare", s=settings), workers=4, s=settings)
    assert result.ok
    final = {key: result.get(key).series.rel_grad[-1] for key in ("nshr", "al", "bk")}
    assert final["nshr"] < final["al"]
    assert final["nshr"] < final["bk"]
