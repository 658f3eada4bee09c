# FILE: velox_core/simulation/state.py

from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class SimState(BaseModel):
    """Estado del vehículo simulado entre dos replanificaciones."""
    model_config = ConfigDict(frozen=True)

    s_glo: float = Field(0.0, description="Posición en la pista (envuelta en pistas cerradas).")
    s_total: float = Field(0.0, ge=0, description="Distancia recorrida desde la salida.")
    v: float = Field(1.0, ge=0, description="Velocidad en el punto de enlace.")
    a_x: float = Field(0.0, description="Aceleración planificada en el punto de enlace.")
    t: float = Field(0.0, ge=0, description="Tiempo de simulación.")
    lap: int = Field(0, ge=0, description="Vueltas completadas.")
    E_loc: float = Field(0.0, ge=0, description="Energía de tracción consumida ∫max(F,0)ds (J).")


class ReplanPolicy(BaseModel):
    """Cuándo se replanifica y cuántos puntos iniciales se conservan del plan anterior."""
    model_config = ConfigDict(frozen=True)

    replan_distance_m: Optional[float] = Field(10.3, gt=0, description="Distancia recorrida entre planes.")
    replan_period_s: Optional[float] = Field(None, gt=0, description="Periodo de replanificación alternativo.")
    hold_points: int = Field(1, ge=1, description="Puntos iniciales fijados del plan anterior (1 = solo v₀).")
    parallel_modes: bool = Field(False, description="Resolver Performance y Emergency en paralelo.")

    @model_validator(mode='after')
    def _one_regime(self):
        if (self.replan_distance_m is None) == (self.replan_period_s is None):
            raise ValueError("Definir exactamente uno de replan_distance_m o replan_period_s.")
        return self


class RaceSettings(BaseModel):
    model_config = ConfigDict(frozen=True)

    laps: int = Field(2, ge=1, description="Vueltas a completar en pistas cerradas.")
    max_cycles: int = Field(5000, gt=0, description="Tope de ciclos de replanificación.")
    stop_speed_mps: float = Field(0.5, gt=0, description="Velocidad a la que se da por detenido el vehículo.")
    max_failure_retries: int = Field(3, ge=0, description="Fallos consecutivos tolerados reutilizando el plan anterior.")
    energy_budget_J: Optional[float] = Field(None, gt=0, description="E_glo fijado a mano; sustituye al derivado de la estrategia energética.")


class TraversedPiece(BaseModel):
    """Un trozo recorrido con fuerza constante; una fila del perfil de carrera."""
    cycle: int
    mode: str
    s_glo: float
    s_total: float
    t: float
    v: float
    ax: float
    ay: float
    F: float
    P: float
    eps: float
    ds: float


class PatchAudit(BaseModel):
    t_requested: float
    t_applied: float
    stamp: int
    s_range: Tuple[float, float]
    horizon: Tuple[float, float]


class RaceReport(BaseModel):
    """Resumen del cierre de lazo: tiempos, energía, holguras y diagnóstico SQP/QP."""
    lap_times_s: List[float] = Field(default_factory=list)
    total_time_s: float = 0.0
    distance_m: float = 0.0
    cycles: int = 0
    stopped: bool = False
    end_reason: str = ""
    E_loc_J: float = 0.0
    lap_energy_J: List[float] = Field(default_factory=list)
    energy_budget_J: Optional[float] = None
    energy_budget_source: Optional[str] = Field(None, description="'strategy' si se deriva de la estrategia energética, 'config' si lo fija el escenario.")
    within_energy_budget: Optional[bool] = None
    max_slack_pct: float = 0.0
    mean_slack_pct: float = 0.0
    failures: int = 0
    sqp_stats: Dict[str, Dict[str, Any]] = Field(default_factory=dict)
    patch_audit: List[PatchAudit] = Field(default_factory=list)
    profile: List[TraversedPiece] = Field(default_factory=list)
    cycle_diagnostics: List[Dict[str, Any]] = Field(default_factory=list)

    def summary(self) -> Dict[str, Any]:
        """Documento JSON sin las tablas por tramo ni por ciclo."""
        return self.model_dump(exclude={'profile', 'cycle_diagnostics'})
