# FILE: velox_core/config.py

"""
Esquema versionado del fichero de escenario (JSON) y construcción de las
entradas de la simulación: pista, mapa de límites, vehículo y eventos.
"""
import json
import os
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ScenarioError
from .planner.settings import PlannerSettings
from .simulation.energy import apply_energy_strategy, strategy_lap_energy
from .simulation.state import RaceSettings, ReplanPolicy, SimState
from .track import synthetic
from .track.loaders import (
    load_accel_map_csv,
    load_energy_strategy_csv,
    load_map_patches_csv,
    load_track_csv,
)
from .track.track_map import AccelLimitMap, MapPatch, TrackMap
from .utils.logger import logger
from .vehicle.params import VehicleParams, resolve_accel_floor

SCHEMA_VERSION = 1

_TRACK_BUILDERS = {
    'straight': synthetic.straight_track,
    'single_corner': synthetic.single_corner_track,
    'oval': synthetic.oval_track,
    'random_circuit': synthetic.random_circuit,
}
_MAP_BUILDERS = {
    'constant': synthetic.constant_limit_map,
    'stepped': synthetic.stepped_limit_map,
    'alternating': synthetic.alternating_friction_map,
}
_SEEDED = {'random_circuit', 'stepped'}


# --- SECCIÓN: BLOQUES DEL ESCENARIO ---

class SyntheticTrackSpec(BaseModel):
    kind: Literal['straight', 'single_corner', 'oval', 'random_circuit']
    params: Dict[str, Any] = Field(default_factory=dict, description="Argumentos del generador.")
    seed: Optional[int] = Field(None, ge=0, description="Semilla; --seed la sustituye.")


class SyntheticMapSpec(BaseModel):
    kind: Literal['constant', 'stepped', 'alternating'] = 'constant'
    params: Dict[str, Any] = Field(default_factory=dict)
    seed: Optional[int] = Field(None, ge=0)


class MapPatchEvent(BaseModel):
    type: Literal['map_patch']
    file: str = Field(..., description="CSV con columnas s_glo,ax_bar,ay_bar,t_apply.")


class EmergencyEvent(BaseModel):
    type: Literal['emergency']
    distance_m: float = Field(..., gt=0, description="Distancia total recorrida a la que se activa el perfil de emergencia.")


ScenarioEvent = Annotated[Union[MapPatchEvent, EmergencyEvent], Field(discriminator='type')]


class StartState(BaseModel):
    model_config = ConfigDict(frozen=True)

    s_glo: float = Field(0.0, ge=0, description="Posición de salida.")
    v: float = Field(1.0, ge=0, description="Velocidad de salida; 1 m/s evita el término 1/v en v = 0.")
    a_x: float = Field(0.0, description="Aceleración inicial.")


class ScenarioInputs(BaseModel):
    """Datos ya cargados y listos para el orquestador."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    track: TrackMap
    limit_map: AccelLimitMap
    vehicle: VehicleParams
    patches: List[Tuple[float, MapPatch]] = Field(default_factory=list)
    emergency_distance_m: Optional[float] = None
    energy_budget_J: Optional[float] = Field(None, description="E_glo derivado de la estrategia energética.")


# --- SECCIÓN: ESCENARIO ---

class ScenarioConfig(BaseModel):
    """Fichero de escenario. Las rutas relativas se resuelven contra su directorio."""
    model_config = ConfigDict(extra='forbid')

    schema_version: Literal[1] = Field(SCHEMA_VERSION, description="Versión del esquema.")
    name: str = Field("escenario", description="Nombre informativo.")
    track_file: Optional[str] = None
    synthetic_track: Optional[SyntheticTrackSpec] = None
    accel_map_file: Optional[str] = None
    synthetic_map: SyntheticMapSpec = Field(default_factory=SyntheticMapSpec)
    energy_strategy_file: Optional[str] = None
    vehicle: VehicleParams = Field(default_factory=VehicleParams.devbot)
    performance: PlannerSettings = Field(default_factory=PlannerSettings.performance)
    emergency: PlannerSettings = Field(default_factory=PlannerSettings.emergency)
    replan: ReplanPolicy = Field(default_factory=ReplanPolicy)
    start: StartState = Field(default_factory=StartState)
    race: RaceSettings = Field(default_factory=RaceSettings)
    events: List[ScenarioEvent] = Field(default_factory=list)

    @field_validator('performance', mode='before')
    @classmethod
    def _merge_performance(cls, value):
        # Los campos dados se superponen al preset de la tabla de parametrización.
        if isinstance(value, dict):
            return {**PlannerSettings.performance().model_dump(), **value, 'mode': 'Performance'}
        return value

    @field_validator('emergency', mode='before')
    @classmethod
    def _merge_emergency(cls, value):
        if isinstance(value, dict):
            return {**PlannerSettings.emergency().model_dump(), **value, 'mode': 'Emergency'}
        return value

    @model_validator(mode='after')
    def _check_sources(self):
        if (self.track_file is None) == (self.synthetic_track is None):
            raise ValueError("Definir exactamente uno de track_file o synthetic_track.")
        if sum(isinstance(e, EmergencyEvent) for e in self.events) > 1:
            raise ValueError("Solo se admite un evento de emergencia.")
        return self

    @classmethod
    def load(cls, path: str) -> "ScenarioConfig":
        """Lee y valida el JSON; los errores de esquema llegan como ValidationError."""
        if not os.path.isfile(path):
            raise ScenarioError(f"No se encontró el escenario '{path}'.")
        try:
            with open(path, 'r', encoding='utf-8') as f:
                raw = json.load(f)
        except (json.JSONDecodeError, UnicodeDecodeError) as e:
            raise ScenarioError(f"El escenario '{path}' no es JSON válido: {e}") from e
        if not isinstance(raw, dict):
            raise ScenarioError(f"El escenario '{path}' debe ser un objeto JSON.")

        base_dir = os.path.dirname(os.path.abspath(path))
        for key in ('track_file', 'accel_map_file', 'energy_strategy_file'):
            if isinstance(raw.get(key), str):
                raw[key] = os.path.join(base_dir, raw[key])
        for event in raw.get('events') or []:
            if isinstance(event, dict) and isinstance(event.get('file'), str):
                event['file'] = os.path.join(base_dir, event['file'])

        config = cls.model_validate(raw)
        logger.info(f"Escenario '{config.name}' cargado desde '{path}'.",
                    extra={'data': {'schema_version': config.schema_version, 'events': len(config.events)}})
        return config

    @property
    def emergency_distance_m(self) -> Optional[float]:
        for event in self.events:
            if isinstance(event, EmergencyEvent):
                return event.distance_m
        return None

    # --- SECCIÓN: CONSTRUCCIÓN DE ENTRADAS ---

    def _build_track(self, seed: Optional[int]) -> TrackMap:
        if self.track_file is not None:
            return load_track_csv(self.track_file)
        spec = self.synthetic_track
        kwargs = dict(spec.params)
        if spec.kind in _SEEDED:
            kwargs['seed'] = seed if seed is not None else (spec.seed or 0)
        return _call_builder(_TRACK_BUILDERS[spec.kind], spec.kind, kwargs)

    def _build_map(self, track: TrackMap, seed: Optional[int]) -> AccelLimitMap:
        if self.accel_map_file is not None:
            return load_accel_map_csv(self.accel_map_file)
        spec = self.synthetic_map
        kwargs = {'length': track.s_end, **spec.params}
        if spec.kind in _SEEDED:
            kwargs['seed'] = seed if seed is not None else (spec.seed or 0)
        return _call_builder(_MAP_BUILDERS[spec.kind], spec.kind, kwargs)

    def build_inputs(self, seed: Optional[int] = None) -> ScenarioInputs:
        """
        Carga o genera la pista y el mapa, aplica la estrategia energética y
        reúne los parches. Con estrategia, E_glo se deriva de su perfil P_max(s_glo);
        race.energy_budget_J solo lo sustituye.
        """
        track = self._build_track(seed)
        if self.energy_strategy_file is not None:
            track = apply_energy_strategy(track, load_energy_strategy_csv(self.energy_strategy_file))
        limit_map = self._build_map(track, seed)
        vehicle = resolve_accel_floor(self.vehicle, limit_map)

        energy_budget = None
        if self.energy_strategy_file is not None:
            energy_budget = strategy_lap_energy(track, limit_map, vehicle, self.start.v)

        patches: List[Tuple[float, MapPatch]] = []
        for event in self.events:
            if isinstance(event, MapPatchEvent):
                patches.extend(load_map_patches_csv(event.file))
        patches.sort(key=lambda item: item[0])

        return ScenarioInputs(
            track=track,
            limit_map=limit_map,
            vehicle=vehicle,
            patches=patches,
            emergency_distance_m=self.emergency_distance_m,
            energy_budget_J=energy_budget,
        )

    def start_state(self) -> SimState:
        return SimState(s_glo=self.start.s_glo, v=self.start.v, a_x=self.start.a_x)


def _call_builder(builder, kind: str, kwargs: Dict[str, Any]):
    try:
        return builder(**kwargs)
    except TypeError as e:
        raise ScenarioError(f"Parámetros inválidos para el generador '{kind}': {e}") from e
    except ValidationError as e:
        raise ScenarioError(f"El generador '{kind}' produjo datos inválidos: {e}") from e
