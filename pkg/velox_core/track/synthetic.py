"""
Generadores de pistas y mapas sintéticos. Reproducibles a partir de la semilla.
"""
from typing import Optional

import numpy as np

from .track_map import AccelLimitMap, TrackMap

DEFAULT_V_MAX = 80.0
DEFAULT_P_MAX = 270000.0


def _grid(length: float, step: float) -> np.ndarray:
    n = int(np.ceil(length / step))
    return np.linspace(0.0, length, n + 1)


def _track_from_kappa(s_glo, kappa, v_max, p_max, closed) -> TrackMap:
    return TrackMap(s_glo=s_glo, kappa=kappa, v_max=np.full(s_glo.size, v_max),
                    p_max=np.full(s_glo.size, p_max), closed=closed)


def straight_track(length: float = 1000.0, step: float = 1.0, v_max: float = DEFAULT_V_MAX,
                   p_max: float = DEFAULT_P_MAX, closed: bool = False) -> TrackMap:
    s_glo = _grid(length, step)
    return _track_from_kappa(s_glo, np.zeros(s_glo.size), v_max, p_max, closed)


def single_corner_track(length: float = 800.0, corner_start: float = 350.0, corner_length: float = 60.0,
                        radius: float = 50.0, step: float = 1.0, v_max: float = DEFAULT_V_MAX,
                        p_max: float = DEFAULT_P_MAX) -> TrackMap:
    """Recta, curva de radio constante y recta (pista abierta)."""
    s_glo = _grid(length, step)
    kappa = np.where((s_glo >= corner_start) & (s_glo < corner_start + corner_length), 1.0 / radius, 0.0)
    return _track_from_kappa(s_glo, kappa, v_max, p_max, closed=False)


def oval_track(straight_length: float = 400.0, radius: float = 60.0, step: float = 1.0,
               v_max: float = DEFAULT_V_MAX, p_max: float = DEFAULT_P_MAX) -> TrackMap:
    """Óvalo cerrado: recta, semicírculo, recta, semicírculo."""
    arc = np.pi * radius
    lap = 2.0 * straight_length + 2.0 * arc
    s_glo = _grid(lap, step)
    pos = np.mod(s_glo, lap)
    in_arc = ((pos >= straight_length) & (pos < straight_length + arc)) | (pos >= 2.0 * straight_length + arc)
    kappa = np.where(in_arc, 1.0 / radius, 0.0)
    kappa[-1] = kappa[0]
    return _track_from_kappa(s_glo, kappa, v_max, p_max, closed=True)


def random_circuit(seed: int = 0, n_corners: int = 6, step: float = 1.0, min_radius: float = 25.0,
                   max_radius: float = 150.0, min_straight: float = 80.0, max_straight: float = 350.0,
                   v_max: float = DEFAULT_V_MAX, p_max: float = DEFAULT_P_MAX) -> TrackMap:
    """Circuito cerrado de rectas y curvas de radio constante con signo aleatorio."""
    rng = np.random.default_rng(seed)
    pieces = []
    for _ in range(n_corners):
        pieces.append((rng.uniform(min_straight, max_straight), 0.0))
        radius = rng.uniform(min_radius, max_radius)
        sign = 1.0 if rng.random() < 0.5 else -1.0
        pieces.append((rng.uniform(0.3, 1.2) * np.pi * radius / 2.0, sign / radius))

    lap = float(sum(length for length, _ in pieces))
    s_glo = _grid(lap, step)
    edges = np.cumsum([length for length, _ in pieces])
    piece_idx = np.minimum(np.searchsorted(edges, s_glo, side='right'), len(pieces) - 1)
    kappa = np.array([pieces[i][1] for i in piece_idx])
    kappa[-1] = kappa[0]
    return _track_from_kappa(s_glo, kappa, v_max, p_max, closed=True)


# --- MAPAS DE LÍMITES ---

def constant_limit_map(length: float, ax_bar: float = 12.5, ay_bar: float = 12.5, step: float = 10.0) -> AccelLimitMap:
    s_glo = _grid(length, step)
    return AccelLimitMap(s_glo=s_glo, ax_bar=np.full(s_glo.size, ax_bar), ay_bar=np.full(s_glo.size, ay_bar))


def stepped_limit_map(length: float, low: float = 10.0, high: float = 13.0, step: float = 10.0,
                      max_slope: float = 0.1, seed: int = 0) -> AccelLimitMap:
    """
    Límites variables sobre una malla de paso `step`; la diferencia entre filas
    consecutivas está acotada por max_slope·step.
    """
    rng = np.random.default_rng(seed)
    s_glo = _grid(length, step)
    max_jump = max_slope * np.diff(s_glo)
    values = np.empty(s_glo.size)
    values[0] = rng.uniform(low, high)
    for i, jump in enumerate(max_jump, start=1):
        values[i] = np.clip(values[i - 1] + rng.uniform(-jump, jump), low, high)
    return AccelLimitMap(s_glo=s_glo, ax_bar=values.copy(), ay_bar=values.copy())


def alternating_friction_map(length: float, ax_bar: float = 12.5, ay_low: float = 6.5, ay_high: float = 12.5,
                             period: float = 200.0, step: float = 10.0, offset: Optional[float] = None) -> AccelLimitMap:
    """ā_y alterna entre tramos de baja y alta adherencia; ā_x constante."""
    s_glo = _grid(length, step)
    phase = np.mod(s_glo - (offset or 0.0), period)
    ay = np.where(phase < period / 2.0, ay_low, ay_high)
    return AccelLimitMap(s_glo=s_glo, ax_bar=np.full(s_glo.size, ax_bar), ay_bar=ay)
