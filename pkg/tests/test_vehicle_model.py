import numpy as np
import pytest
from pydantic import ValidationError

from velox_core.track.track_map import AccelLimitMap
from velox_core.vehicle import (
    VehicleParams,
    applied_force,
    coast_speed_analytic,
    drag_force,
    lateral_accel,
    power,
    resolve_accel_floor,
    segment_time,
    terminal_speed,
    travel_time,
)


class TestForces:
    def test_drag_force(self, devbot):
        assert drag_force(50.0, devbot) == pytest.approx(2125.0)

    def test_applied_force(self, devbot):
        assert applied_force(2.0, 10.0, devbot) == pytest.approx(2405.0)

    def test_power_sign_follows_force(self):
        assert power(2405.0, 10.0) == pytest.approx(24050.0)
        assert power(-1000.0, 20.0) == pytest.approx(-20000.0)

    def test_lateral_accel_keeps_curvature_sign(self):
        np.testing.assert_allclose(lateral_accel(np.array([0.02, -0.02]), 20.0), [8.0, -8.0])

    def test_vectorized(self, devbot):
        v = np.array([0.0, 10.0, 50.0])
        np.testing.assert_allclose(drag_force(v, devbot), [0.0, 85.0, 2125.0])


class TestSpeeds:
    def test_terminal_speed(self, devbot):
        assert terminal_speed(devbot) == pytest.approx(15.811, abs=1e-3)

    def test_coast_speed_at_origin(self, devbot):
        assert coast_speed_analytic(40.0, 0.0, devbot) == pytest.approx(40.0)

    def test_coast_speed_halves_after_log2_distance(self, devbot):
        s_half = devbot.mass_kg / devbot.drag_lump_kg_per_m * np.log(2.0)
        assert coast_speed_analytic(40.0, s_half, devbot) == pytest.approx(20.0)

    def test_segment_time(self):
        assert segment_time(10.0, 20.0, 15.0) == pytest.approx(1.0)

    def test_segment_time_at_standstill_is_infinite(self):
        assert np.isinf(segment_time(0.0, 0.0, 1.0))

    def test_travel_time_is_cumulative(self):
        np.testing.assert_allclose(travel_time([10.0, 20.0, 20.0], [15.0, 20.0]), [0.0, 1.0, 2.0])


class TestVehicleParams:
    def test_devbot_defaults(self):
        params = VehicleParams.devbot()
        assert params.mass_kg == 1160.0
        assert params.power_max_W == 270000.0
        assert params.accel_min_floor_ms2 is None

    @pytest.mark.parametrize("overrides", [
        {'mass_kg': 0.0},
        {'force_min_N': 100.0},
        {'drag_lump_kg_per_m': -0.1},
        {'curvature_max_per_m': 0.0},
    ])
    def test_invalid_values_rejected(self, overrides):
        with pytest.raises(ValidationError):
            VehicleParams(**overrides)

    def test_params_are_immutable(self, devbot):
        with pytest.raises(ValidationError):
            devbot.mass_kg = 1000.0

    def test_floor_from_map_uses_both_columns(self):
        limit_map = AccelLimitMap(s_glo=[0.0, 10.0], ax_bar=[11.0, 12.0], ay_bar=[13.0, 9.0])
        resolved = resolve_accel_floor(VehicleParams.devbot(), limit_map)
        assert resolved.accel_min_floor_ms2 == pytest.approx(9.0)

    def test_configured_floor_is_kept(self, devbot):
        limit_map = AccelLimitMap(s_glo=[0.0, 10.0], ax_bar=[5.0, 5.0], ay_bar=[5.0, 5.0])
        assert resolve_accel_floor(devbot, limit_map).accel_min_floor_ms2 == 12.5
