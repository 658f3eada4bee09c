import numpy as np
import pytest

from velox_core.errors import (
    EnergyStrategyCoverageError,
    HorizonExceedsTrackError,
    HorizonOverlapError,
    ScenarioError,
    TrackDataError,
)
from velox_core.simulation.energy import apply_energy_strategy
from velox_core.track import (
    AccelLimitMap,
    EnergyStrategy,
    MapPatch,
    TrackMap,
    conservative_interpolate,
    conservative_profile,
    horizon_overlaps,
    load_accel_map_csv,
    load_map_patches_csv,
    load_track_csv,
    patch_influence,
    sample_local_path,
    save_track_csv,
    synthetic,
    update_limits,
)


class TestConservativeInterpolation:
    GRID = np.array([0.0, 10.0, 20.0])
    VALUES = np.array([10.0, 12.0, 8.0])

    @pytest.mark.parametrize("s, expected", [
        (5.0, 10.0),    # tramo creciente: se mantiene el valor izquierdo
        (15.0, 10.0),   # tramo decreciente: rampa lineal
        (20.0, 8.0),
        (25.0, 8.0),
        (-5.0, 10.0),
    ])
    def test_reference_values(self, s, expected):
        assert conservative_profile(self.GRID, self.VALUES, s) == pytest.approx(expected)

    def test_never_exceeds_left_value_nor_drops_below_neighbours(self):
        rng = np.random.default_rng(7)
        grid = np.cumsum(rng.uniform(1.0, 20.0, 40))
        values = rng.uniform(6.0, 14.0, 40)
        s = rng.uniform(grid[0], grid[-1], 500)
        idx = np.searchsorted(grid, s, side='right') - 1
        nxt = np.minimum(idx + 1, grid.size - 1)
        result = conservative_profile(grid, values, s)
        assert np.all(result <= values[idx] + 1e-12)
        assert np.all(result >= np.minimum(values[idx], values[nxt]) - 1e-12)

    def test_limits_object_carries_stamp(self):
        limit_map = synthetic.constant_limit_map(100.0, ax_bar=11.0, ay_bar=9.0)
        limits = conservative_interpolate(limit_map)
        ax, ay = limits(np.array([3.0, 47.5]))
        np.testing.assert_allclose(ax, 11.0)
        np.testing.assert_allclose(ay, 9.0)
        assert limits.stamp == 0


class TestLocalPath:
    def test_open_track_sampling(self, straight, constant_map):
        path = sample_local_path(straight, constant_map, 100.0, np.full(10, 5.0))
        assert path.M == 11
        np.testing.assert_allclose(path.s_m, np.arange(11) * 5.0)
        np.testing.assert_allclose(path.s_glo, 100.0 + np.arange(11) * 5.0)
        assert path.origin_glo == pytest.approx(100.0)
        np.testing.assert_allclose(path.ax_bar, 12.5)

    def test_horizon_past_open_track_end(self, constant_map):
        track = synthetic.straight_track(length=1000.0)
        with pytest.raises(HorizonExceedsTrackError):
            sample_local_path(track, constant_map, 950.0, np.full(10, 10.0))

    def test_closed_track_wraps(self):
        oval = synthetic.oval_track()
        limit_map = synthetic.constant_limit_map(oval.lap_length)
        start = oval.lap_length - 50.0
        path = sample_local_path(oval, limit_map, start, np.full(10, 10.0))
        assert path.s_glo[-1] == pytest.approx(50.0)
        assert np.all(path.s_glo < oval.lap_length)
        assert path.kappa[0] == pytest.approx(1.0 / 60.0)
        assert path.kappa[-1] == 0.0

    def test_samples_are_read_only(self, straight, constant_map):
        path = sample_local_path(straight, constant_map, 0.0, np.full(4, 1.0))
        with pytest.raises(ValueError):
            path.kappa[0] = 1.0

    def test_limits_ramp_across_lap_end(self):
        oval = synthetic.oval_track()
        lap = oval.lap_length
        limit_map = AccelLimitMap(s_glo=[0.0, 500.0, lap - 10.0], ax_bar=[12.0, 12.0, 12.0],
                                  ay_bar=[8.0, 12.0, 12.0])
        assert conservative_interpolate(limit_map, lap)(lap - 5.0)[1] == pytest.approx(10.0)
        assert conservative_interpolate(limit_map)(lap - 5.0)[1] == pytest.approx(12.0)
        path = sample_local_path(oval, limit_map, lap - 10.0, np.full(3, 5.0))
        np.testing.assert_allclose(path.ay_bar, [12.0, 10.0, 8.0, 8.0], atol=1e-6)

    def test_lap_not_starting_at_zero(self):
        s_glo = np.linspace(100.0, 600.0, 501)
        track = TrackMap(s_glo=s_glo, kappa=np.zeros(501), v_max=np.full(501, 80.0),
                         p_max=np.full(501, 270000.0), closed=True)
        assert track.lap_length == pytest.approx(500.0)
        assert track.wrap(650.0) == pytest.approx(150.0)
        limit_map = AccelLimitMap(s_glo=[100.0, 300.0, 590.0], ax_bar=[12.0, 12.0, 12.0],
                                  ay_bar=[8.0, 12.0, 12.0])
        path = sample_local_path(track, limit_map, 590.0, np.full(3, 5.0))
        np.testing.assert_allclose(path.s_glo, [590.0, 595.0, 100.0, 105.0], atol=1e-9)
        np.testing.assert_allclose(path.ay_bar, [12.0, 10.0, 8.0, 8.0], atol=1e-6)

        open_track = track.model_copy(update={'closed': False})
        with pytest.raises(HorizonExceedsTrackError):
            sample_local_path(open_track, limit_map, 50.0, np.full(3, 5.0))

    def test_shifted_horizon_limits_drop_at_most_slope_times_shift(self):
        limit_map = synthetic.stepped_limit_map(2000.0, step=10.0, max_slope=0.1, seed=1)
        track = synthetic.straight_track(length=2000.0)
        steps = np.full(40, 3.5)
        for start in (200.0, 517.0, 1234.0):
            before = sample_local_path(track, limit_map, start, steps)
            after = sample_local_path(track, limit_map, start + 2.0, steps)
            assert np.all(after.ay_bar - before.ay_bar >= -0.1 * 2.0 - 1e-9)
            assert np.all(after.ax_bar - before.ax_bar >= -0.1 * 2.0 - 1e-9)


class TestUpdateLimits:
    @pytest.fixture
    def limit_map(self):
        return synthetic.constant_limit_map(1000.0)

    def test_patch_replaces_rows_and_bumps_stamp(self, limit_map):
        patch = MapPatch(s_glo=[505.0, 515.0], ax_bar=[8.0, 8.0], ay_bar=[7.0, 7.0])
        updated = update_limits(limit_map, patch, horizon=(0.0, 400.0))
        assert updated.stamp == limit_map.stamp + 1
        assert 510.0 not in updated.s_glo
        assert updated.s_glo.size == limit_map.s_glo.size + 1
        assert conservative_profile(updated.s_glo, updated.ay_bar, 510.0) == pytest.approx(7.0)
        assert limit_map.stamp == 0

    def test_overlap_is_rejected(self, limit_map):
        patch = MapPatch(s_glo=[300.0, 320.0], ax_bar=[8.0, 8.0], ay_bar=[8.0, 8.0])
        with pytest.raises(HorizonOverlapError):
            update_limits(limit_map, patch, horizon=(0.0, 400.0))

    def test_endpoint_contact_counts_as_overlap(self, limit_map):
        patch = MapPatch(s_glo=[400.0, 420.0], ax_bar=[8.0, 8.0], ay_bar=[8.0, 8.0])
        with pytest.raises(HorizonOverlapError):
            update_limits(limit_map, patch, horizon=(0.0, 400.0))

    def test_wrapped_horizon(self):
        assert horizon_overlaps((20.0, 40.0), (950.0, 1050.0), lap_length=1000.0)
        assert not horizon_overlaps((100.0, 120.0), (950.0, 1050.0), lap_length=1000.0)
        assert not horizon_overlaps((20.0, 40.0), (950.0, 1050.0))

    def test_influence_reaches_previous_stored_point(self, limit_map):
        patch = MapPatch(s_glo=[305.0, 400.0], ax_bar=[6.0, 6.0], ay_bar=[6.0, 6.0])
        assert patch_influence(limit_map, patch) == pytest.approx((300.0, 410.0))

    def test_patch_beyond_horizon_that_moves_its_ramp_is_rejected(self, limit_map):
        # la rampa 300 → 305 cae dentro de (0, 302) aunque el parche empiece en 305
        patch = MapPatch(s_glo=[305.0, 400.0], ax_bar=[6.0, 6.0], ay_bar=[6.0, 6.0])
        before = conservative_interpolate(limit_map)(301.0)
        with pytest.raises(HorizonOverlapError):
            update_limits(limit_map, patch, horizon=(0.0, 302.0))
        forced = update_limits(limit_map, patch, horizon=(1500.0, 1600.0))
        after = conservative_interpolate(forced)(301.0)
        assert after[1] < before[1]

    def test_influence_wraps_on_closed_maps(self):
        limit_map = AccelLimitMap(s_glo=np.arange(0.0, 1000.0, 10.0), ax_bar=np.full(100, 12.5),
                                  ay_bar=np.full(100, 12.5))
        patch = MapPatch(s_glo=[0.0, 15.0], ax_bar=[8.0, 8.0], ay_bar=[8.0, 8.0])
        assert patch_influence(limit_map, patch, lap_length=1000.0) == pytest.approx((-10.0, 20.0))
        with pytest.raises(HorizonOverlapError):
            update_limits(limit_map, patch, horizon=(950.0, 995.0), lap_length=1000.0)
        update_limits(limit_map, patch, horizon=(100.0, 500.0), lap_length=1000.0)


class TestLoaders:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ScenarioError):
            load_track_csv(str(tmp_path / "no_existe.csv"))

    def test_missing_columns(self, tmp_path):
        path = tmp_path / "track.csv"
        path.write_text("s_glo,kappa\n0,0\n1,0\n")
        with pytest.raises(ScenarioError, match="v_max"):
            load_track_csv(str(path))

    def test_non_increasing_grid(self, tmp_path):
        path = tmp_path / "map.csv"
        path.write_text("s_glo,ax_bar,ay_bar\n0,12,12\n0,12,12\n")
        with pytest.raises(TrackDataError):
            load_accel_map_csv(str(path))

    def test_closed_flag(self, tmp_path):
        path = str(tmp_path / "oval.csv")
        save_track_csv(synthetic.oval_track(), path)
        track = load_track_csv(path)
        assert track.closed
        assert track.lap_length == pytest.approx(synthetic.oval_track().lap_length)

    def test_patches_grouped_by_apply_time(self, tmp_path):
        path = tmp_path / "patches.csv"
        path.write_text("s_glo,ax_bar,ay_bar,t_apply\n"
                        "510,9,9,5.0\n500,9,9,5.0\n"
                        "100,8,8,2.0\n")
        patches = load_map_patches_csv(str(path))
        assert [t for t, _ in patches] == [2.0, 5.0]
        assert patches[1][1].s_range == (500.0, 510.0)


class TestEnergyStrategy:
    @pytest.fixture
    def track(self):
        return synthetic.straight_track(length=1000.0)

    def test_zero_order_hold_and_clamp(self, track):
        strategy = EnergyStrategy(s_glo=[0.0, 500.0, 1000.0], p_max=[100000.0, -5.0, 200000.0])
        updated = apply_energy_strategy(track, strategy)
        np.testing.assert_allclose(updated.value_at('p_max', [250.0, 500.0, 999.0, 1000.0]),
                                   [100000.0, 0.0, 0.0, 200000.0])
        assert np.all(track.p_max == 270000.0)

    @pytest.mark.parametrize("grid", [[0.0, 900.0], [10.0, 1000.0]])
    def test_coverage(self, track, grid):
        strategy = EnergyStrategy(s_glo=grid, p_max=[1.0, 1.0])
        with pytest.raises(EnergyStrategyCoverageError):
            apply_energy_strategy(track, strategy)


class TestSynthetic:
    def test_random_circuit_is_reproducible(self):
        a = synthetic.random_circuit(seed=3)
        b = synthetic.random_circuit(seed=3)
        c = synthetic.random_circuit(seed=4)
        np.testing.assert_array_equal(a.kappa, b.kappa)
        assert a.closed and a.kappa[-1] == a.kappa[0]
        assert a.s_glo.size != c.s_glo.size or not np.array_equal(a.kappa, c.kappa)

    def test_stepped_map_slope_is_bounded(self):
        limit_map = synthetic.stepped_limit_map(2000.0, step=10.0, max_slope=0.1, seed=1)
        assert np.max(np.abs(np.diff(limit_map.ay_bar))) <= 1.0 + 1e-12
        assert np.all((limit_map.ay_bar >= 10.0) & (limit_map.ay_bar <= 13.0))
