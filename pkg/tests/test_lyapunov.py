import numpy as np
import pytest

from nshr.errors import InsufficientSamplesError, InvalidParameterError
from nshr.models import DynamicKind
from nshr.services.bench import build_spec
from nshr.services.dynamics import simulate
from nshr.services.lyapunov import (
    LyapunovParams,
    cumulative_integral,
    default_sigma,
    diagnostics,
    energy_integrals,
    fit_rate,
    lyapunov_onset,
    lyapunov_params,
    lyapunov_value,
    lyapunov_value_monotone,
    monotone_dissipation,
    oscillation_metric,
    plateau_fraction,
    prox_shadow_violation,
    relative_series,
    velocity_decay,
)

ORIGIN = np.zeros(2)


def test_eta_arithmetic():
    assert LyapunovParams(2.0, 4.0, 1.0, ORIGIN).eta == pytest.approx(1.0)
    assert LyapunovParams(1.5, 4.0, 1.0, ORIGIN).eta == pytest.approx(1.125)
    with pytest.raises(InvalidParameterError):
        LyapunovParams(3.0, 4.0, 1.0, ORIGIN)


def test_default_sigma_is_the_middle_of_the_feasible_interval(nshr_spec):
    # zeta = alpha - 3 - p = 0.5
    assert default_sigma(nshr_spec) == pytest.approx(2.75)
    assert lyapunov_params(nshr_spec).sigma == pytest.approx(2.75)


def test_energies_vanish_at_rest_at_the_minimizer(nshr_spec, settings):
    params = lyapunov_params(nshr_spec)
    assert lyapunov_value(params, nshr_spec, 3.0, ORIGIN, ORIGIN) == 0.0
    hrmmd = build_spec(DynamicKind.HRMMD, s=settings)
    assert lyapunov_value_monotone(1.5, 1.125, hrmmd, 3.0, ORIGIN, ORIGIN) == 0.0


def test_energy_is_positive_away_from_the_minimizer(nshr_spec):
    params = lyapunov_params(nshr_spec)
    assert lyapunov_value(params, nshr_spec, 2.0, (1.0, -1.0), (0.0, 0.0)) > 0.0


def test_objective_energy_rejects_other_kinds(settings):
    spec = build_spec(DynamicKind.BASELINE_UNIT, s=settings)
    params = LyapunovParams(1.5, 4.0, 1.0, ORIGIN)
    with pytest.raises(InvalidParameterError):
        lyapunov_value(params, spec, 2.0, ORIGIN, ORIGIN)


def test_relative_series():
    assert np.allclose(relative_series([2.0, 1.0, 0.5]), [1.0, 0.5, 0.25])
    zero_start = relative_series([0.0, 0.0, 1.0])
    assert zero_start[0] == 1.0 and zero_start[1] == 1.0 and np.isnan(zero_start[2])


def test_fit_rate_on_exact_power_law():
    t = np.geomspace(1.0, 50.0, 200)
    assert fit_rate(t, t ** -2.0, (20.0, 50.0)) == pytest.approx(-2.0, abs=1e-9)
    assert fit_rate(t, np.full(t.shape, 3.0), (20.0, 50.0)) == pytest.approx(0.0, abs=1e-9)


def test_fit_rate_with_multiplicative_noise(rng):
    t = np.geomspace(1.0, 50.0, 600)
    for exponent in (-1.5, -2.5, -4.0):
        noisy = t ** exponent * (1.0 + rng.uniform(-0.01, 0.01, size=t.shape))
        assert fit_rate(t, noisy, (20.0, 50.0)) == pytest.approx(exponent, abs=0.05)


def test_fit_rate_reports_the_floor():
    t = np.geomspace(1.0, 50.0, 200)
    with pytest.raises(InsufficientSamplesError) as info:
        fit_rate(t, np.zeros(t.shape), (20.0, 50.0))
    assert info.value.floor_hit
    with pytest.raises(InsufficientSamplesError) as info:
        fit_rate(t[:5], t[:5] ** -2.0, (1.0, 2.0))
    assert not info.value.floor_hit


def test_oscillation_metric():
    t = np.linspace(1.0, 50.0, 41)
    assert oscillation_metric(t, np.exp(-t), (1.0, 50.0)) == pytest.approx(0.0, abs=1e-9)
    amplitude = 0.3
    zigzag = np.exp(amplitude * (-1.0) ** np.arange(41))
    # 40 alternating jumps of 2a, no net change
    assert oscillation_metric(t, zigzag, (1.0, 50.0)) == pytest.approx(80.0 * amplitude)


def test_lyapunov_onset():
    t = np.arange(8.0)
    values = np.array([5.0, 6.0, 4.0, 4.5, 3.0, 2.0, 1.0, 0.5])
    assert lyapunov_onset(t, values) == 3.0
    assert lyapunov_onset(t, np.linspace(8.0, 1.0, 8)) == 0.0


def test_cumulative_integral_and_plateau():
    t = np.linspace(1.0, 11.0, 101)
    assert np.allclose(cumulative_integral(t, np.ones(t.shape)), t - 1.0)
    t = np.geomspace(1.0, 100.0, 400)
    assert plateau_fraction(t, cumulative_integral(t, t ** -3.0)) < 0.05
    assert plateau_fraction(t, np.zeros(t.shape)) == 0.0


def test_equilibrium_diagnostics(nshr_spec):
    traj = simulate(nshr_spec, ORIGIN, ORIGIN, t_end=5.0, sample_grid=np.linspace(1.0, 5.0, 9))
    series = diagnostics(nshr_spec, traj)
    assert np.all(series.obj_gap == 0.0)
    assert np.all(series.env_gap == 0.0)
    assert np.all(series.grad_norm == 0.0)
    assert np.all(series.lyapunov == 0.0)
    assert np.all(series.rel_obj == 1.0)


def test_trajectory_diagnostics(tight_trajectory):
    spec, traj = tight_trajectory
    series = diagnostics(spec, traj)
    assert len(series) == len(traj)
    assert series.rel_obj[0] == 1.0 and series.rel_grad[0] == 1.0
    assert series.obj_gap[-1] <= 1e-4 * series.obj_gap[0]
    assert prox_shadow_violation(series) <= 1e-12
    assert np.allclose(series.x_norm, np.linalg.norm(series.x, axis=1))


def test_baselines_carry_no_energy(settings):
    spec = build_spec(DynamicKind.BASELINE_DELTA, s=settings)
    traj = simulate(spec, t_end=3.0, sample_grid=np.linspace(1.0, 3.0, 11), s=settings)
    series = diagnostics(spec, traj)
    assert np.all(np.isnan(series.lyapunov))
    assert np.all(np.isfinite(series.obj_gap))


def test_monotone_dissipation_on_the_demo_schedule(settings):
    spec = build_spec(
        DynamicKind.HRMMD, settings.MONOTONE_ALPHA, settings.MONOTONE_BETA, settings.MONOTONE_P,
        settings.monotone_c, s=settings,
    )
    for t in (2.0, 10.0, 40.0):
        d = monotone_dissipation(spec, settings.MONOTONE_SIGMA, t)
        assert d.discriminant < 0
        assert d.L == pytest.approx(settings.monotone_c)
        assert d.epsilon == pytest.approx(0.375)
        assert d.dissipative
        assert d.m == pytest.approx(0.375 * t)
        assert d.n > 0


@pytest.mark.slow
def test_standard_run_rates_and_energy(tight_trajectory, settings):
    spec, traj = tight_trajectory
    series = diagnostics(spec, traj)
    window = settings.RATE_WINDOW

    try:
        assert fit_rate(series.t, series.obj_gap, window) <= -2.2
    except InsufficientSamplesError as e:
        # the l1 term thresholds prox(x) to the minimizer, so the gap reaches exact zero
        assert e.floor_hit
    assert fit_rate(series.t, series.grad_norm, window) <= -2.2

    assert lyapunov_onset(series.t, series.lyapunov) < 10.0

    decay = velocity_decay(series.t, series.t_xdot_norm)
    assert decay.decaying

    kinetic, gradient = energy_integrals(spec, traj)
    assert np.all(np.diff(kinetic) >= 0) and np.all(np.diff(gradient) >= 0)
    assert plateau_fraction(series.t, kinetic) < 0.05
    assert plateau_fraction(series.t, gradient) < 0.05


@pytest.mark.slow
def test_rotation_driven_run_decays_at_the_predicted_rate(settings):
    spec = build_spec(
        DynamicKind.HRMMD, settings.MONOTONE_ALPHA, settings.MONOTONE_BETA, settings.MONOTONE_P,
        settings.monotone_c, operator="rotation", s=settings,
    )
    traj = simulate(spec, s=settings)
    series = diagnostics(spec, traj)

    assert fit_rate(series.t, series.grad_norm, settings.RATE_WINDOW) <= -(settings.MONOTONE_P + 2.0) + 0.4
    assert series.x_norm[-1] <= 1e-2 * series.x_norm[0]
    assert lyapunov_onset(series.t, series.lyapunov) < 10.0
