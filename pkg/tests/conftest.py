import json
import os

import pytest

from velox_core.planner.settings import PlannerSettings
from velox_core.track import synthetic
from velox_core.vehicle.params import VehicleParams


@pytest.fixture
def devbot():
    return VehicleParams.devbot().model_copy(update={'accel_min_floor_ms2': 12.5})


@pytest.fixture
def straight():
    return synthetic.straight_track(length=3000.0)


@pytest.fixture
def corner():
    return synthetic.single_corner_track()


@pytest.fixture
def constant_map():
    return synthetic.constant_limit_map(3000.0)


@pytest.fixture
def small_performance():
    """M=31, N=3 (Ñ=10) sobre 150 m; presupuesto holgado para máquinas lentas."""
    return PlannerSettings.performance(points=31, slack_count=3, horizon_m=150.0, time_budget_s=5.0)


@pytest.fixture
def small_emergency():
    return PlannerSettings.emergency(points=21, slack_count=2, horizon_m=100.0, time_budget_s=5.0)


@pytest.fixture
def write_scenario(tmp_path):
    """Escribe un escenario JSON en tmp_path y devuelve su ruta."""
    def _write(document, name="scenario.json"):
        path = os.path.join(tmp_path, name)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(document, f)
        return path
    return _write
