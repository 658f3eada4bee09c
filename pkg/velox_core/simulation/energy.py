# FILE: velox_core/simulation/energy.py

"""Estrategia energética sobre la pista y libro de energía de tracción."""
from typing import Iterable

import numpy as np

from ..errors import EnergyStrategyCoverageError
from ..planner.envelope import braking_envelope, forward_envelope, power_caps, speed_caps
from ..track.loaders import EnergyStrategy
from ..track.track_map import AccelLimitMap, TrackMap, _hold_index, sample_local_path
from ..utils.logger import logger
from ..vehicle.params import VehicleParams, resolve_accel_floor

_COVERAGE_TOL = 1e-6


def apply_energy_strategy(track: TrackMap, strategy: EnergyStrategy) -> TrackMap:
    """
    Sustituye la columna p_max por la serie P_max(s_glo) de la estrategia.

    Los valores negativos se recortan a 0: solo se restringe la potencia de
    tracción y la frenada queda libre. La serie debe cubrir toda la vuelta.
    """
    if strategy.s_glo[0] > track.s_glo[0] + _COVERAGE_TOL or strategy.s_glo[-1] < track.s_end - _COVERAGE_TOL:
        raise EnergyStrategyCoverageError(
            f"La estrategia cubre [{strategy.s_glo[0]:.1f}, {strategy.s_glo[-1]:.1f}] m y la pista "
            f"[{track.s_glo[0]:.1f}, {track.s_end:.1f}] m."
        )
    p_max = np.maximum(strategy.p_max[_hold_index(strategy.s_glo, track.s_glo)], 0.0)
    clipped = int(np.sum(strategy.p_max < 0))
    if clipped:
        logger.debug(f"{clipped} valores negativos de la estrategia energética recortados a 0.")
    return track.model_copy(update={'p_max': p_max})


def energy_from_profile(forces: Iterable[float], ds: Iterable[float]) -> float:
    """E_loc = Σ max(F, 0)·Δs con F constante en cada trozo."""
    forces = np.asarray(list(forces), dtype=float)
    ds = np.asarray(list(ds), dtype=float)
    return float(np.sum(np.maximum(forces, 0.0) * ds))


def strategy_lap_energy(track: TrackMap, limit_map: AccelLimitMap, params: VehicleParams, v_start: float,
                        step_m: float = 5.0) -> float:
    """
    E_glo: energía de tracción de una vuelta recorrida a la máxima velocidad que
    permiten la curvatura, el mapa de límites y la potencia P_max(s_glo) de la
    estrategia (envolvente atrás/delante desde v_start).
    """
    count = max(int(np.ceil(track.lap_length / step_m)), 2)
    path = sample_local_path(track, limit_map, track.lap_start, np.full(count, track.lap_length / count))
    params = resolve_accel_floor(params, limit_map)
    floor = params.accel_min_floor_ms2
    _, w_cap = speed_caps(path, floor)
    w_back = braking_envelope(path, params, w_cap, None, floor)
    w = forward_envelope(path, params, w_back, v_start, floor, power_caps(path, params))
    ds = np.asarray(path.ds, dtype=float)
    forces = params.mass_kg * (w[1:] - w[:-1]) / (2.0 * ds) + params.drag_lump_kg_per_m * w[:-1]
    energy = energy_from_profile(forces, ds)
    logger.info("Presupuesto energético por vuelta derivado de la estrategia.", extra={
        'data': {'energy_budget_J': energy, 'lap_length_m': track.lap_length, 'v_start': v_start}})
    return energy
