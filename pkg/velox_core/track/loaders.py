"""
Lectura de los ficheros CSV de pista, mapa de límites, estrategia energética y
parches del mapa. Unidades SI en todas las columnas.
"""
import os
from typing import List, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from ..errors import ScenarioError, TrackDataError
from ..utils.logger import logger
from .track_map import AccelLimitMap, MapPatch, TrackMap

TRACK_COLUMNS = ("s_glo", "kappa", "v_max", "p_max")
MAP_COLUMNS = ("s_glo", "ax_bar", "ay_bar")
PATCH_COLUMNS = MAP_COLUMNS + ("t_apply",)
ES_COLUMNS = ("s_glo", "p_max")


class EnergyStrategy(BaseModel):
    """Serie P_max(s_glo) calculada fuera de línea por la estrategia energética."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    s_glo: np.ndarray
    p_max: np.ndarray

    @field_validator('s_glo', 'p_max', mode='before')
    @classmethod
    def _to_array(cls, value):
        return np.array(value, dtype=float)

    @model_validator(mode='after')
    def _check_grid(self):
        if self.s_glo.size < 1 or self.s_glo.shape != self.p_max.shape:
            raise ValueError("La serie de la estrategia energética está vacía o descuadrada.")
        if np.any(np.diff(self.s_glo) <= 0):
            raise ValueError("s_glo de la estrategia energética debe ser estrictamente creciente.")
        return self


def _read_frame(path: str, columns: Sequence[str]) -> pd.DataFrame:
    if not os.path.isfile(path):
        raise ScenarioError(f"No se encontró el fichero '{path}'.")
    try:
        frame = pd.read_csv(path, comment='#', skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise ScenarioError(f"No se pudo leer '{path}': {e}") from e

    frame.columns = [str(c).strip() for c in frame.columns]
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ScenarioError(f"'{path}' no contiene las columnas {missing}; cabecera esperada {','.join(columns)}.")
    try:
        return frame[list(columns)].apply(pd.to_numeric, errors='raise')
    except ValueError as e:
        raise ScenarioError(f"'{path}' contiene valores no numéricos: {e}") from e


def _read_closed_flag(path: str) -> bool:
    with open(path, 'r', encoding='utf-8') as f:
        for line in f:
            stripped = line.strip().replace(' ', '')
            if stripped.startswith('#closed='):
                return stripped.split('=', 1)[1].lower() == 'true'
    return False


def load_track_csv(path: str) -> TrackMap:
    frame = _read_frame(path, TRACK_COLUMNS)
    closed = _read_closed_flag(path)
    try:
        track = TrackMap(closed=closed, **{c: frame[c].to_numpy() for c in TRACK_COLUMNS})
    except ValidationError as e:
        raise TrackDataError(f"Pista inválida en '{path}': {e}") from e
    logger.info(f"Pista cargada desde '{path}'.", extra={'data': {'points': int(frame.shape[0]), 'closed': closed,
                                                                  'lap_length_m': track.lap_length}})
    return track


def load_accel_map_csv(path: str) -> AccelLimitMap:
    frame = _read_frame(path, MAP_COLUMNS)
    try:
        return AccelLimitMap(**{c: frame[c].to_numpy() for c in MAP_COLUMNS})
    except ValidationError as e:
        raise TrackDataError(f"Mapa de límites inválido en '{path}': {e}") from e


def load_energy_strategy_csv(path: str) -> EnergyStrategy:
    frame = _read_frame(path, ES_COLUMNS)
    try:
        return EnergyStrategy(s_glo=frame['s_glo'].to_numpy(), p_max=frame['p_max'].to_numpy())
    except ValidationError as e:
        raise TrackDataError(f"Estrategia energética inválida en '{path}': {e}") from e


def load_map_patches_csv(path: str) -> List[Tuple[float, MapPatch]]:
    """Agrupa las filas por `t_apply`; devuelve (t_apply, parche) ordenados en el tiempo."""
    frame = _read_frame(path, PATCH_COLUMNS)
    patches = []
    for t_apply, group in frame.groupby('t_apply', sort=True):
        group = group.sort_values('s_glo', kind='stable')
        try:
            patch = MapPatch(**{c: group[c].to_numpy() for c in MAP_COLUMNS})
        except ValidationError as e:
            raise TrackDataError(f"Parche inválido en '{path}' (t_apply={t_apply}): {e}") from e
        patches.append((float(t_apply), patch))
    return patches


# --- ESCRITURA (usada por los generadores sintéticos y las pruebas) ---

def save_track_csv(track: TrackMap, path: str):
    frame = pd.DataFrame({c: getattr(track, c) for c in TRACK_COLUMNS})
    with open(path, 'w', encoding='utf-8', newline='') as f:
        f.write(f"#closed={'true' if track.closed else 'false'}\n")
        frame.to_csv(f, index=False, float_format='%.10g')


def save_accel_map_csv(limit_map: AccelLimitMap, path: str):
    frame = pd.DataFrame({c: getattr(limit_map, c) for c in MAP_COLUMNS})
    frame.to_csv(path, index=False, float_format='%.10g')
