# FILE: velox_core/planner/envelope.py

"""
Envolventes longitudinales sobre el modelo discreto del planificador.

Trabajan en w = v² con fuerza constante por tramo y el rombo evaluado en v_k,
igual que las filas del QP, de modo que un perfil construido aquí cumple las
restricciones no lineales con holgura nula y el primer QP linealizado a su
alrededor admite δ = 0.
"""
from typing import Optional, Tuple

import numpy as np

from ..track.track_map import LocalPath
from ..vehicle.params import VehicleParams

KAPPA_FLOOR = 1e-5


def segment_limits(path: LocalPath, accel_floor: float) -> Tuple[np.ndarray, np.ndarray]:
    """ā_x, ā_y por tramo; el último tramo usa el suelo ā_min."""
    ax_seg = np.array(path.ax_bar[:-1], dtype=float)
    ay_seg = np.array(path.ay_bar[:-1], dtype=float)
    ax_seg[-1] = ay_seg[-1] = accel_floor
    return ax_seg, ay_seg


def speed_caps(path: LocalPath, accel_floor: float) -> Tuple[np.ndarray, np.ndarray]:
    """(v_curv, w_cap): tope por curvatura y su cuadrado recortado por v_max."""
    _, ay_seg = segment_limits(path, accel_floor)
    ay_point = np.concatenate((ay_seg, [path.ay_bar[-1]]))
    v_curv = np.sqrt(ay_point / np.maximum(np.abs(path.kappa), KAPPA_FLOOR))
    return v_curv, np.square(np.minimum(path.v_max, v_curv))


def braking_envelope(path: LocalPath, p: VehicleParams, w_cap: np.ndarray, v_end: Optional[float],
                     accel_floor: float) -> np.ndarray:
    """Pasada implícita hacia atrás con max(F_min, rombo) desde min(w_cap, v_end²)."""
    m, c_r = p.mass_kg, p.drag_lump_kg_per_m
    ds = np.asarray(path.ds, dtype=float)
    kappa = np.abs(np.asarray(path.kappa, dtype=float))
    ax_seg, ay_seg = segment_limits(path, accel_floor)

    w = np.empty(path.M)
    w[-1] = w_cap[-1] if v_end is None else min(w_cap[-1], v_end ** 2)
    for k in range(path.M - 2, -1, -1):
        h = 2.0 * ds[k]
        w_diamond = (w[k + 1] + h * ax_seg[k]) / (1.0 + h * ax_seg[k] * kappa[k] / ay_seg[k] - h * c_r / m)
        w_force = (w[k + 1] - h * p.force_min_N / m) / (1.0 - h * c_r / m)
        w[k] = min(w_diamond, w_force, w_cap[k])
    return w


def forward_envelope(path: LocalPath, p: VehicleParams, w_upper: np.ndarray, v_ini: float, accel_floor: float,
                     power_cap: Optional[np.ndarray] = None, a_x_ini: float = 0.0,
                     delta_a: Optional[float] = None) -> np.ndarray:
    """
    Integración explícita desde v_ini con la mayor fuerza admisible
    min(F_max, rombo, P/v_k) y recorte por `w_upper`.

    Con δ_a activo, la aceleración del primer tramo queda dentro de
    [a_x_ini − δ_a, a_x_ini + δ_a] para respetar el enlace con el plan anterior.
    """
    m, c_r = p.mass_kg, p.drag_lump_kg_per_m
    ds = np.asarray(path.ds, dtype=float)
    kappa = np.abs(np.asarray(path.kappa, dtype=float))
    ax_seg, ay_seg = segment_limits(path, accel_floor)

    w = np.empty(path.M)
    w[0] = v_ini ** 2
    for k in range(path.M - 1):
        force = min(m * ax_seg[k] * (1.0 - kappa[k] * w[k] / ay_seg[k]), p.force_max_N)
        if power_cap is not None and w[k] > 0:
            force = min(force, power_cap[k] / np.sqrt(w[k]))
        accel = (force - c_r * w[k]) / m
        if k == 0 and delta_a is not None:
            accel = float(np.clip(accel, a_x_ini - delta_a, a_x_ini + delta_a))
        w[k + 1] = min(max(w[k] + 2.0 * ds[k] * accel, 0.0), w_upper[k + 1])
    return w


def braking_profile(path: LocalPath, p: VehicleParams, w_upper: np.ndarray, v_ini: float,
                    accel_floor: float) -> np.ndarray:
    """Frenada desde v_ini con la fuerza más negativa que admiten F_min y el rombo, hasta parar."""
    m, c_r = p.mass_kg, p.drag_lump_kg_per_m
    ds = np.asarray(path.ds, dtype=float)
    kappa = np.abs(np.asarray(path.kappa, dtype=float))
    ax_seg, ay_seg = segment_limits(path, accel_floor)

    w = np.empty(path.M)
    w[0] = v_ini ** 2
    for k in range(path.M - 1):
        grip = max(1.0 - kappa[k] * w[k] / ay_seg[k], 0.0)
        force = max(p.force_min_N, -p.mass_kg * ax_seg[k] * grip)
        w[k + 1] = min(max(w[k] + 2.0 * ds[k] * (force - c_r * w[k]) / m, 0.0), w_upper[k + 1])
    return w


def power_caps(path: LocalPath, p: VehicleParams) -> np.ndarray:
    """Cota de potencia por tramo min(P_max, P_ES(s))."""
    return np.minimum(p.power_max_W, np.asarray(path.p_max[:-1], dtype=float))


def feasible_profile(path: LocalPath, p: VehicleParams, v_ini: float, v_end: Optional[float],
                     accel_floor: float, a_x_ini: float = 0.0, delta_a: Optional[float] = None) -> np.ndarray:
    """Velocidades que cumplen todas las filas no lineales de Performance: atrás, después delante."""
    _, w_cap = speed_caps(path, accel_floor)
    w_back = braking_envelope(path, p, w_cap, v_end, accel_floor)
    w = forward_envelope(path, p, w_back, v_ini, accel_floor, power_caps(path, p), a_x_ini, delta_a)
    return np.sqrt(np.maximum(w, 0.0))
