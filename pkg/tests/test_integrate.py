import math

import numpy as np
import pytest

from nshr.errors import InvalidParameterError, MaxStepsExceededError, NonFiniteError
from nshr.models import IntegratorConfig
from nshr.services.integrate import integrate, resample, resample_uniform


def _decay(t, z):
    return -z


def test_exponential_decay():
    traj = integrate(_decay, 0.0, [1.0], 1.0)
    assert traj.times[-1] == 1.0
    assert abs(traj.states[-1, 0] - math.exp(-1.0)) <= 1e-8
    assert traj.stats.accepted > 0
    assert traj.stats.evaluations >= 6 * traj.stats.accepted


def test_constant_field_is_exact():
    z0 = np.array([3.0, -2.0, 0.5])
    traj = integrate(lambda t, z: np.zeros_like(z), 0.0, z0, 10.0, sample_grid=np.linspace(0.0, 10.0, 7))
    assert len(traj) == 7
    assert np.array_equal(traj.states, np.tile(z0, (7, 1)))


def test_harmonic_oscillator_returns_after_one_period():
    field = lambda t, z: np.array([z[1], -z[0]])
    traj = integrate(field, 0.0, [1.0, 0.0], 2.0 * math.pi)
    assert np.allclose(traj.states[-1], [1.0, 0.0], atol=1e-6)


def test_sample_grid_includes_endpoints_and_matches_solution():
    grid = np.linspace(0.25, 1.75, 7)
    traj = integrate(_decay, 0.0, [1.0], 2.0, sample_grid=grid)
    assert traj.times[0] == 0.0 and traj.times[-1] == 2.0
    assert np.allclose(traj.states[:, 0], np.exp(-traj.times), atol=1e-8)


def test_resample_uniform_exponential():
    traj = integrate(_decay, 0.0, [1.0], 1.0)
    fine = resample_uniform(traj, 0.01)
    assert fine.times[0] == 0.0
    assert fine.times[-1] == pytest.approx(1.0)
    assert np.allclose(fine.states[:, 0], np.exp(-fine.times), atol=1e-8)


def test_resample_constant_trajectory():
    traj = integrate(lambda t, z: np.zeros_like(z), 0.0, [4.0], 1.0)
    assert np.allclose(resample(traj, [0.1, 0.5, 0.9]).states[:, 0], 4.0)


def test_resample_outside_span_is_rejected():
    traj = integrate(_decay, 0.0, [1.0], 1.0)
    with pytest.raises(InvalidParameterError):
        resample(traj, [1.5])
    with pytest.raises(InvalidParameterError):
        resample_uniform(traj, 2.0)


def test_invalid_horizon_and_grid():
    with pytest.raises(InvalidParameterError):
        integrate(_decay, 1.0, [1.0], 1.0)
    with pytest.raises(InvalidParameterError):
        integrate(_decay, 0.0, [1.0], 1.0, sample_grid=[2.0])


def test_non_finite_start_is_reported():
    with pytest.raises(NonFiniteError):
        integrate(_decay, 0.0, [math.nan], 1.0)
    with pytest.raises(NonFiniteError):
        integrate(lambda t, z: z / 0.0 if t == 0.0 else z, 0.0, [1.0], 1.0)


def test_step_budget_is_enforced():
    with pytest.raises(MaxStepsExceededError):
        integrate(_decay, 0.0, [1.0], 100.0, IntegratorConfig(max_steps=5))


def test_tighter_tolerance_is_more_accurate():
    loose = integrate(_decay, 0.0, [1.0], 5.0, IntegratorConfig(abs_tol=1e-4, rel_tol=1e-4))
    tight = integrate(_decay, 0.0, [1.0], 5.0, IntegratorConfig(abs_tol=1e-12, rel_tol=1e-12))
    exact = math.exp(-5.0)
    assert abs(tight.states[-1, 0] - exact) < abs(loose.states[-1, 0] - exact)
    assert tight.stats.accepted > loose.stats.accepted


@pytest.mark.parametrize("field, z0, t_end, exact", [
    (_decay, [1.0], 5.0, [math.exp(-5.0)]),
    (lambda t, z: np.array([z[1], -z[0]]), [1.0, 0.0], 2.0 * math.pi, [1.0, 0.0]),
])
def test_halving_the_tolerance_does_not_lose_accuracy(field, z0, t_end, exact):
    errors = []
    for k in range(6):
        tol = 1e-5 / 2.0 ** k
        traj = integrate(field, 0.0, z0, t_end, IntegratorConfig(abs_tol=tol, rel_tol=tol))
        errors.append(float(np.max(np.abs(traj.states[-1] - exact))))
    for coarse, fine in zip(errors, errors[1:]):
        assert fine <= 1.5 * coarse + 1e-15
    assert errors[-1] < errors[0]


def test_step_statistics_respect_the_step_cap():
    traj = integrate(_decay, 0.0, [1.0], 1.0, IntegratorConfig(max_step=0.01))
    assert traj.stats.accepted + traj.stats.rejected >= 1.0 / 0.01
    assert traj.stats.evaluations >= traj.stats.accepted
    assert abs(traj.states[-1, 0] - math.exp(-1.0)) <= 1e-8
