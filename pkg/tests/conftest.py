import numpy as np
import pytest

from nshr.config import get_settings
from nshr.models import DynamicKind, IntegratorConfig, StateLayout
from nshr.services.bench import build_spec
from nshr.services.dynamics import simulate
from nshr.services.proxcore import TestObjective


# The standard damping configuration: alpha=4, beta=1, delta=t^0.5, gamma=0.01 t^2.5.
TIGHT = IntegratorConfig(abs_tol=1e-13, rel_tol=1e-11)


@pytest.fixture(scope="session")
def settings():
    return get_settings()


@pytest.fixture
def objective():
    return TestObjective()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def nshr_spec(settings):
    return build_spec(DynamicKind.NSHR, s=settings)


@pytest.fixture(scope="session")
def tight_trajectory(settings):
    spec = build_spec(DynamicKind.NSHR, s=settings)
    grid = np.geomspace(settings.T0, settings.T_END, 200)
    return spec, simulate(spec, config=TIGHT, sample_grid=grid, s=settings)


@pytest.fixture(scope="session")
def tight_xy_trajectory(settings):
    spec = build_spec(DynamicKind.NSHR, s=settings)
    grid = np.geomspace(settings.T0, settings.T_END, 200)
    return spec, simulate(spec, config=TIGHT, sample_grid=grid, layout=StateLayout.XY, s=settings)
