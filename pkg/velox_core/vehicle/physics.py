"""
Física cerrada del modelo de masa puntual.

Funciones puras: aceptan escalares o arrays de numpy y devuelven lo mismo.
Fuerzas y aceleraciones longitudinales son positivas en el sentido de marcha.
"""
import numpy as np

from .params import VehicleParams


def drag_force(v, p: VehicleParams):
    """Resistencia c_r·v² en N."""
    return p.drag_lump_kg_per_m * np.square(v)


def applied_force(a_x, v, p: VehicleParams):
    """Fuerza del tren motor F_x,p = m_v·a_x + c_r·v²."""
    return p.mass_kg * np.asarray(a_x) + drag_force(v, p)


def power(force, v):
    """Potencia de la máquina P = F·v (negativa al frenar)."""
    return np.asarray(force) * np.asarray(v)


def lateral_accel(kappa, v):
    """a_y = κ·v², con el signo de la curvatura."""
    return np.asarray(kappa) * np.square(v)


def terminal_speed(p: VehicleParams) -> float:
    """Velocidad mínima que el vehículo puede tomar en cualquier curva: sqrt(a_y,max / κ_max)."""
    if p.curvature_max_per_m <= 0:
        raise ValueError("curvature_max_per_m debe ser positiva.")
    return float(np.sqrt(p.accel_lat_max_ms2 / p.curvature_max_per_m))


def coast_speed_analytic(v0, s, p: VehicleParams):
    """Solución de m_v·v·dv/ds = -c_r·v²: v0·exp(-(c_r/m_v)·s)."""
    return np.asarray(v0) * np.exp(-(p.drag_lump_kg_per_m / p.mass_kg) * np.asarray(s))


# --- LETARGIA (dt/ds) ---

def segment_time(v_a, v_b, ds):
    """Tiempo exacto de un tramo con a_x constante: 2·Δs/(v_a+v_b)."""
    v_sum = np.asarray(v_a) + np.asarray(v_b)
    with np.errstate(divide='ignore'):
        return np.where(v_sum > 0, 2.0 * np.asarray(ds) / np.where(v_sum > 0, v_sum, 1.0), np.inf)


def travel_time(v, ds) -> np.ndarray:
    """Tiempo acumulado en cada punto de un perfil (longitud M, empieza en 0)."""
    v = np.asarray(v, dtype=float)
    times = segment_time(v[:-1], v[1:], ds)
    return np.concatenate(([0.0], np.cumsum(times)))
