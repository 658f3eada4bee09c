# FILE: velox_core/oracle/forward_backward.py

"""
Perfil de velocidad de referencia por pasadas hacia delante y hacia atrás.

Trabaja sobre el mismo modelo discreto que el planificador (w = v², fuerza
constante por tramo, rombo ℓ¹ con ā_min en el último tramo) pero sin tirón ni
límites de potencia, de modo que su resultado es el máximo punto a punto del
conjunto factible.
"""
from enum import Enum
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict

from ..errors import OracleInfeasibleStartError
from ..planner.envelope import braking_envelope, forward_envelope, speed_caps
from ..track.track_map import LocalPath
from ..vehicle.params import VehicleParams

_TAG_TOL = 1e-9


class LimitingFactor(str, Enum):
    CURVATURE = "Curvature"
    FORWARD_ACCEL = "ForwardAccel"
    BACKWARD_BRAKE = "BackwardBrake"
    SPEED_CAP = "SpeedCap"


class OracleProfile(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    s_m: np.ndarray
    v: np.ndarray
    a_x: np.ndarray
    v_cap: np.ndarray
    limiting: List[LimitingFactor]

    def is_capped(self) -> np.ndarray:
        return np.array([tag in (LimitingFactor.CURVATURE, LimitingFactor.SPEED_CAP) for tag in self.limiting])

    def cap_transitions(self) -> np.ndarray:
        """Índices donde el perfil entra o sale de un límite de velocidad."""
        capped = self.is_capped()
        return np.where(capped[1:] != capped[:-1])[0] + 1


class OracleComparison(BaseModel):
    max_rel_dev: float
    mean_rel_dev: float
    worst_index: int
    compared_points: int
    excluded_points: int


def forward_backward(path: LocalPath, p: VehicleParams, v_ini: float, v_end: float,
                     accel_floor: Optional[float] = None) -> OracleProfile:
    """
    Pasada 1: tope por curvatura sqrt(ā_y/|κ|) recortado por v_max.
    Pasada 2: integración explícita desde v_ini con min(F_max, rombo) y resistencia.
    Pasada 3: integración implícita desde v_end con max(F_min, rombo).
    Resultado: mínimo punto a punto.
    """
    if accel_floor is None:
        accel_floor = p.accel_min_floor_ms2 or float(min(np.min(path.ax_bar), np.min(path.ay_bar)))
    M = path.M
    ds = np.asarray(path.ds, dtype=float)

    # --- PASADA 1: TOPES ---
    v_curv, w_cap = speed_caps(path, accel_floor)
    v_cap = np.sqrt(w_cap)

    # --- PASADA 2: HACIA DELANTE ---
    w_fwd = forward_envelope(path, p, w_cap, v_ini, accel_floor)

    # --- PASADA 3: HACIA ATRÁS (implícita en w_k) ---
    w_bwd = braking_envelope(path, p, w_cap, v_end, accel_floor)

    envelope_0 = np.sqrt(min(w_cap[0], w_bwd[0]))
    if v_ini > envelope_0 + 1e-9:
        raise OracleInfeasibleStartError(v_ini, float(envelope_0))

    w = np.minimum(np.minimum(w_fwd, w_bwd), w_cap)
    w[0] = v_ini ** 2
    v = np.sqrt(np.maximum(w, 0.0))

    limiting = []
    for k in range(M):
        best = w[k] + _TAG_TOL * max(1.0, w[k])
        if k > 0 and w_cap[k] <= best:
            limiting.append(LimitingFactor.CURVATURE if v_curv[k] < path.v_max[k] else LimitingFactor.SPEED_CAP)
        elif k == 0 or w_fwd[k] <= w_bwd[k]:
            limiting.append(LimitingFactor.FORWARD_ACCEL)
        else:
            limiting.append(LimitingFactor.BACKWARD_BRAKE)

    return OracleProfile(
        s_m=np.asarray(path.s_m),
        v=v,
        a_x=(w[1:] - w[:-1]) / (2.0 * ds),
        v_cap=v_cap,
        limiting=limiting,
    )


def compare_profiles(plan_v: np.ndarray, oracle: OracleProfile, exclude_radius: int = 2) -> OracleComparison:
    """Desviación relativa |v_plan − v_oráculo| / max(v_oráculo, 1) lejos de las transiciones de tope."""
    plan_v = np.asarray(plan_v, dtype=float)
    if plan_v.shape != oracle.v.shape:
        raise ValueError("El plan y el oráculo deben tener el mismo número de puntos.")
    mask = np.ones(plan_v.size, dtype=bool)
    for idx in oracle.cap_transitions():
        mask[max(idx - exclude_radius - 1, 0):idx + exclude_radius + 1] = False

    rel = np.abs(plan_v - oracle.v) / np.maximum(oracle.v, 1.0)
    compared = rel[mask]
    if compared.size == 0:
        return OracleComparison(max_rel_dev=0.0, mean_rel_dev=0.0, worst_index=-1,
                                compared_points=0, excluded_points=int(plan_v.size))
    worst = int(np.flatnonzero(mask)[np.argmax(compared)])
    return OracleComparison(
        max_rel_dev=float(compared.max()),
        mean_rel_dev=float(compared.mean()),
        worst_index=worst,
        compared_points=int(compared.size),
        excluded_points=int(plan_v.size - compared.size),
    )
