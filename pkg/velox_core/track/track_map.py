# FILE: velox_core/track/track_map.py

from typing import Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..errors import HorizonExceedsTrackError, HorizonOverlapError

# Tolerancia para comparar coordenadas de arco
_S_TOL = 1e-9


def _as_frozen_array(value) -> np.ndarray:
    array = np.array(value, dtype=float)
    array.flags.writeable = False
    return array


def _check_grid(s_glo: np.ndarray, *columns: np.ndarray):
    if s_glo.ndim != 1 or s_glo.size < 2:
        raise ValueError("La malla s_glo necesita al menos 2 puntos.")
    if np.any(np.diff(s_glo) <= 0):
        raise ValueError("s_glo debe ser estrictamente creciente.")
    for column in columns:
        if column.shape != s_glo.shape:
            raise ValueError("Todas las columnas deben tener la longitud de s_glo.")


def _hold_index(grid: np.ndarray, s) -> np.ndarray:
    """Índice del punto de la malla en o antes de s (retención de orden cero)."""
    idx = np.searchsorted(grid, np.asarray(s) + _S_TOL, side='right') - 1
    return np.clip(idx, 0, grid.size - 1)


# --- TIPOS DE DOMINIO ---

class TrackMap(BaseModel):
    """Pista global: curvatura, velocidad máxima y límite de potencia por punto de la malla."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    s_glo: np.ndarray
    kappa: np.ndarray
    v_max: np.ndarray
    p_max: np.ndarray
    closed: bool = False

    @field_validator('s_glo', 'kappa', 'v_max', 'p_max', mode='before')
    @classmethod
    def _to_array(cls, value):
        return _as_frozen_array(value)

    @model_validator(mode='after')
    def _check_invariants(self):
        _check_grid(self.s_glo, self.kappa, self.v_max, self.p_max)
        if np.any(self.v_max <= 0):
            raise ValueError("v_max debe ser positiva en toda la pista.")
        if np.any(self.p_max < 0):
            raise ValueError("p_max no puede ser negativa.")
        return self

    @property
    def lap_start(self) -> float:
        return float(self.s_glo[0])

    @property
    def s_end(self) -> float:
        # En pistas cerradas la última fila es el punto de cierre
        return float(self.s_glo[-1])

    @property
    def lap_length(self) -> float:
        return self.s_end - self.lap_start

    def wrap(self, s):
        s = np.asarray(s, dtype=float)
        if self.closed:
            return np.mod(s - self.lap_start, self.lap_length) + self.lap_start
        return s

    def value_at(self, column: str, s) -> np.ndarray:
        """Retención de orden cero de una columna ('kappa', 'v_max', 'p_max')."""
        values = getattr(self, column)
        return values[_hold_index(self.s_glo, self.wrap(s))]


class AccelLimitMap(BaseModel):
    """Mapa 1-D de límites de aceleración almacenados Σ_ā(s_glo); paso de malla variable."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    s_glo: np.ndarray
    ax_bar: np.ndarray
    ay_bar: np.ndarray
    stamp: int = Field(0, ge=0, description="Contador de revisiones del mapa.")

    @field_validator('s_glo', 'ax_bar', 'ay_bar', mode='before')
    @classmethod
    def _to_array(cls, value):
        return _as_frozen_array(value)

    @model_validator(mode='after')
    def _check_invariants(self):
        _check_grid(self.s_glo, self.ax_bar, self.ay_bar)
        if np.any(self.ax_bar <= 0) or np.any(self.ay_bar <= 0):
            raise ValueError("Los límites ax_bar y ay_bar deben ser positivos.")
        return self


class MapPatch(BaseModel):
    """Nuevos valores Σ_ā sobre un rango global; sustituye todas las filas dentro de [s_glo[0], s_glo[-1]]."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    s_glo: np.ndarray
    ax_bar: np.ndarray
    ay_bar: np.ndarray

    @field_validator('s_glo', 'ax_bar', 'ay_bar', mode='before')
    @classmethod
    def _to_array(cls, value):
        return _as_frozen_array(value)

    @model_validator(mode='after')
    def _check_invariants(self):
        if self.s_glo.size < 1:
            raise ValueError("Un parche necesita al menos una fila.")
        if np.any(np.diff(self.s_glo) <= 0):
            raise ValueError("s_glo del parche debe ser estrictamente creciente.")
        if np.any(self.ax_bar <= 0) or np.any(self.ay_bar <= 0):
            raise ValueError("Los límites del parche deben ser positivos.")
        return self

    @property
    def s_range(self) -> Tuple[float, float]:
        return float(self.s_glo[0]), float(self.s_glo[-1])


class LocalPath(BaseModel):
    """Trayecto local discretizado con M puntos; s_m[0] = 0."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    s_m: np.ndarray
    ds: np.ndarray
    kappa: np.ndarray
    v_max: np.ndarray
    p_max: np.ndarray
    ax_bar: np.ndarray
    ay_bar: np.ndarray
    origin_glo: float
    s_glo: Optional[np.ndarray] = None
    stamp: int = 0

    @field_validator('s_m', 'ds', 'kappa', 'v_max', 'p_max', 'ax_bar', 'ay_bar', 's_glo', mode='before')
    @classmethod
    def _to_array(cls, value):
        return None if value is None else _as_frozen_array(value)

    @model_validator(mode='after')
    def _check_invariants(self):
        m = self.s_m.size
        if self.ds.size != m - 1:
            raise ValueError("ds debe tener M-1 elementos.")
        for column in (self.kappa, self.v_max, self.p_max, self.ax_bar, self.ay_bar):
            if column.size != m:
                raise ValueError("Todas las columnas por punto deben tener M elementos.")
        if np.any(self.ds <= 0):
            raise ValueError("Los pasos Δs_m deben ser positivos.")
        if np.any(self.ax_bar <= 0) or np.any(self.ay_bar <= 0):
            raise ValueError("Los límites de aceleración muestreados deben ser positivos.")
        return self

    @property
    def M(self) -> int:
        return int(self.s_m.size)

    @property
    def length(self) -> float:
        return float(self.s_m[-1])


# --- INTERPOLACIÓN CONSERVADORA ---

def conservative_profile(grid: np.ndarray, values: np.ndarray, s) -> np.ndarray:
    """
    Σ̃(s) = min(Σ(s_i), lerp(Σ(s_i), Σ(s_{i+1}), s)) para s en [s_i, s_{i+1}).

    En los tramos crecientes se mantiene el valor izquierdo; en los decrecientes
    la rampa baja antes de la caída. Fuera de la malla se retiene el extremo.
    """
    s = np.asarray(s, dtype=float)
    idx = _hold_index(grid, s)
    left = values[idx]
    nxt = np.minimum(idx + 1, grid.size - 1)
    span = grid[nxt] - grid[idx]
    inside = (nxt != idx) & (s >= grid[0])
    frac = np.where(inside, (s - grid[idx]) / np.where(span > 0, span, 1.0), 0.0)
    frac = np.clip(frac, 0.0, 1.0)
    lerp = left + (values[nxt] - left) * frac
    return np.minimum(left, lerp)


def _periodic_grid(grid: np.ndarray, lap_start: float, lap_length: float) -> Tuple[np.ndarray, np.ndarray]:
    """Índices y coordenadas de la malla con los vecinos de la vuelta anterior y siguiente."""
    index = np.arange(grid.size)
    coords = grid.copy()
    if grid[-1] - lap_length < grid[0] - _S_TOL and grid[0] > lap_start + _S_TOL:
        index = np.concatenate(([grid.size - 1], index))
        coords = np.concatenate(([grid[-1] - lap_length], coords))
    if grid[0] + lap_length > grid[-1] + _S_TOL:
        index = np.concatenate((index, [0]))
        coords = np.concatenate((coords, [grid[0] + lap_length]))
    return index, coords


class ConservativeLimits:
    """
    Función Σ̃_ā(s_glo) ligada a una instantánea del mapa (un solo stamp).

    Con `lap_length` la malla es periódica: la consulta se envuelve a la vuelta
    y la rampa del último punto almacenado apunta al primero de la vuelta
    siguiente.
    """

    def __init__(self, limit_map: AccelLimitMap, lap_length: Optional[float] = None, lap_start: float = 0.0):
        self.limit_map = limit_map
        self.lap_length = lap_length
        self.lap_start = lap_start
        grid = limit_map.s_glo
        if lap_length is None:
            self._index, self._grid = np.arange(grid.size), grid
        else:
            self._index, self._grid = _periodic_grid(grid, lap_start, lap_length)

    @property
    def stamp(self) -> int:
        return self.limit_map.stamp

    def _query(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.lap_length is None:
            return s
        return np.mod(s - self.lap_start, self.lap_length) + self.lap_start

    def ax(self, s) -> np.ndarray:
        return conservative_profile(self._grid, self.limit_map.ax_bar[self._index], self._query(s))

    def ay(self, s) -> np.ndarray:
        return conservative_profile(self._grid, self.limit_map.ay_bar[self._index], self._query(s))

    def __call__(self, s) -> Tuple[np.ndarray, np.ndarray]:
        return self.ax(s), self.ay(s)


def conservative_interpolate(limit_map: AccelLimitMap, lap_length: Optional[float] = None,
                             lap_start: float = 0.0) -> ConservativeLimits:
    if limit_map is None or limit_map.s_glo.size == 0:
        raise ValueError("El mapa de límites está vacío.")
    return ConservativeLimits(limit_map, lap_length, lap_start)


# --- EXTRACCIÓN DEL TRAYECTO LOCAL ---

def sample_local_path(track: TrackMap, limit_map: AccelLimitMap, start_glo: float,
                      steps: Sequence[float]) -> LocalPath:
    """
    Muestrea κ, v_max y p_max por retención de orden cero de la pista, y los
    límites ā_x/ā_y con la interpolación conservadora evaluada en cada s_m.
    """
    steps = np.asarray(steps, dtype=float)
    s_m = np.concatenate(([0.0], np.cumsum(steps)))
    s_abs = float(start_glo) + s_m

    if not track.closed:
        if start_glo < track.lap_start - _S_TOL or s_abs[-1] > track.s_end + _S_TOL:
            raise HorizonExceedsTrackError(
                f"El horizonte [{start_glo:.2f}, {s_abs[-1]:.2f}] m excede la pista abierta "
                f"[{track.lap_start:.2f}, {track.s_end:.2f}] m."
            )
        limits = conservative_interpolate(limit_map)
    else:
        limits = conservative_interpolate(limit_map, track.lap_length, track.lap_start)
    s_glo = track.wrap(s_abs)
    ax_bar, ay_bar = limits(s_glo)

    return LocalPath(
        s_m=s_m,
        ds=steps,
        kappa=track.value_at('kappa', s_glo),
        v_max=track.value_at('v_max', s_glo),
        p_max=track.value_at('p_max', s_glo),
        ax_bar=ax_bar,
        ay_bar=ay_bar,
        origin_glo=float(s_glo[0]),
        s_glo=s_glo,
        stamp=limits.stamp,
    )


# --- ACTUALIZACIÓN DEL MAPA CON COMPUERTA DE HORIZONTE ---

def horizon_overlaps(interval: Tuple[float, float], horizon: Tuple[float, float],
                     lap_length: Optional[float] = None) -> bool:
    """Intersección de intervalos cerrados; en pistas cerradas se prueban las copias desplazadas una vuelta."""
    a, b = interval
    h_a, h_b = horizon
    if lap_length is None:
        return a <= h_b and h_a <= b
    if b - a >= lap_length or h_b - h_a >= lap_length:
        return True
    shifts = lap_length * np.arange(-2, 3)
    return bool(np.any((a + shifts <= h_b) & (h_a <= b + shifts)))


def patch_influence(limit_map: AccelLimitMap, patch: MapPatch,
                    lap_length: Optional[float] = None) -> Tuple[float, float]:
    """
    Rango de s_glo donde Σ̃_ā puede cambiar al aplicar el parche: desde el punto
    almacenado anterior a p_a hasta el posterior a p_b. La rampa conservadora
    de ese punto anterior ya apunta a la primera fila del parche.
    """
    p_a, p_b = patch.s_range
    grid = limit_map.s_glo
    before = grid[grid < p_a - _S_TOL]
    after = grid[grid > p_b + _S_TOL]
    if lap_length is None:
        s_prev = float(before[-1]) if before.size else -np.inf
        s_next = float(after[0]) if after.size else np.inf
        return s_prev, s_next
    kept = grid[(grid < p_a - _S_TOL) | (grid > p_b + _S_TOL)]
    if kept.size == 0:
        return -np.inf, np.inf
    s_prev = float(before[-1]) if before.size else float(kept[-1]) - lap_length
    s_next = float(after[0]) if after.size else float(kept[0]) + lap_length
    return s_prev, s_next


def update_limits(limit_map: AccelLimitMap, patch: MapPatch, horizon: Tuple[float, float],
                  lap_length: Optional[float] = None) -> AccelLimitMap:
    """
    Sustituye los valores almacenados en el rango del parche y avanza el stamp.

    Solo se actualiza si la zona de influencia del parche queda fuera del
    horizonte planificado: un solape (incluido el contacto con un extremo)
    lanza HorizonOverlapError.
    """
    s_prev, s_next = patch_influence(limit_map, patch, lap_length)
    if horizon_overlaps((s_prev, s_next), horizon, lap_length):
        raise HorizonOverlapError(patch.s_range, tuple(horizon))

    p_a, p_b = patch.s_range
    keep = (limit_map.s_glo < p_a) | (limit_map.s_glo > p_b)
    s_new = np.concatenate((limit_map.s_glo[keep], patch.s_glo))
    order = np.argsort(s_new, kind='stable')

    return AccelLimitMap(
        s_glo=s_new[order],
        ax_bar=np.concatenate((limit_map.ax_bar[keep], patch.ax_bar))[order],
        ay_bar=np.concatenate((limit_map.ay_bar[keep], patch.ay_bar))[order],
        stamp=limit_map.stamp + 1,
    )
