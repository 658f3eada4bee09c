from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class VehicleParams(BaseModel):
    """
    Parámetros del modelo de masa puntual.

    Todas las magnitudes en SI. `accel_min_floor_ms2` (ā_x/y,min) puede quedar
    sin definir: en ese caso se deriva del mapa de límites cargado con
    `resolve_accel_floor`.
    """
    model_config = ConfigDict(frozen=True)

    mass_kg: float = Field(1160.0, gt=0, description="Masa del vehículo m_v.")
    drag_lump_kg_per_m: float = Field(0.85, ge=0, description="Coeficiente agrupado de resistencia c_r.")
    force_max_N: float = Field(7100.0, gt=0, description="Fuerza motriz máxima F_max.")
    force_min_N: float = Field(-20000.0, lt=0, description="Fuerza de frenado mínima F_min (negativa).")
    power_max_W: float = Field(270000.0, gt=0, description="Potencia máxima de la máquina P_max.")
    accel_lat_max_ms2: float = Field(12.5, gt=0, description="Aceleración lateral técnica máxima a_y,max.")
    accel_min_floor_ms2: Optional[float] = Field(None, gt=0, description="Límite de aceleración del peor caso ā_x/y,min.")
    curvature_max_per_m: float = Field(0.05, gt=0, description="Curvatura máxima de la pista κ_max.")

    @classmethod
    def devbot(cls) -> "VehicleParams":
        """Datos del DevBot 2.0."""
        return cls()

    @model_validator(mode='after')
    def _check_force_signs(self):
        if not self.force_min_N < 0 < self.force_max_N:
            raise ValueError("Se requiere force_min_N < 0 < force_max_N.")
        return self


def resolve_accel_floor(params: VehicleParams, limit_map) -> VehicleParams:
    """Completa ā_min con el mínimo de ambas columnas del mapa si no viene configurado."""
    if params.accel_min_floor_ms2 is not None:
        return params
    floor = float(min(np.min(limit_map.ax_bar), np.min(limit_map.ay_bar)))
    return params.model_copy(update={'accel_min_floor_ms2': floor})
