# FILE: velox_core/planner/settings.py

import math
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..solvers.qp_types import AdmmSettings


class PlannerMode(str, Enum):
    PERFORMANCE = "Performance"
    EMERGENCY = "Emergency"


class SqpConfig(BaseModel):
    """Control del bucle SQP: paso, tolerancias y presupuestos."""
    model_config = ConfigDict(frozen=True)

    beta: float = Field(0.5, gt=0, lt=1, description="Base del paso α = β^γ.")
    eps_bar_tol: float = Field(1.0, gt=0, description="Tolerancia del error medio ε̄_SQP.")
    eps_hat_tol: float = Field(1.0, gt=0, description="Tolerancia del error máximo ε̂_SQP.")
    max_iter: int = Field(20, gt=0, description="Iteraciones SQP máximas n_SQP,max.")
    time_budget_s: float = Field(0.3, gt=0, description="Presupuesto de reloj Δt_max, comprobado entre iteraciones.")
    max_backtracking: int = Field(20, ge=0, description="γ máximo antes de aceptar el paso más corto.")
    errors_velocity_only: bool = Field(False, description="Calcular ε̄/ε̂ solo sobre las velocidades (no sobre z completo).")
    min_linearization_speed: float = Field(0.5, gt=0, description="Suelo de v en el punto de linealización (m/s).")
    max_infeasible_backoff: int = Field(3, ge=0, description="Retrocesos permitidos ante un QP infactible tras un paso aceptado.")
    qp: AdmmSettings = Field(default_factory=AdmmSettings, description="Configuración del ADMM.")


class PlannerSettings(BaseModel):
    """
    Una columna de la tabla de parametrización del planificador (Performance o
    Emergency): discretización, holguras, penalizaciones y control SQP.
    """
    model_config = ConfigDict(frozen=True)

    mode: PlannerMode = Field(PlannerMode.PERFORMANCE, description="Perfil de rendimiento o de emergencia.")
    points: int = Field(115, ge=4, description="Número de puntos de velocidad M (incluye v₀).")
    slack_count: int = Field(12, ge=1, description="Número de variables de holgura N.")
    delta_a: Optional[float] = Field(0.1, gt=0, description="Tolerancia δ_a de la aceleración inicial; None la desactiva.")
    eps_max_pct: float = Field(3.0, gt=0, description="Holgura máxima ε_max en %.")
    rho_j: float = Field(3e2, ge=0, description="Penalización del tirón ρ_j.")
    rho_eps_l: float = Field(1e5, ge=0, description="Penalización lineal de las holguras ρ_ε,l.")
    rho_eps_q: float = Field(1e4, gt=0, description="Penalización cuadrática de las holguras ρ_ε,q.")
    max_iter: int = Field(20, gt=0, description="n_SQP,max.")
    time_budget_s: float = Field(0.3, gt=0, description="Δt_max en segundos.")
    beta: float = Field(0.5, gt=0, lt=1, description="β del control de paso.")
    eps_sqp_tol: float = Field(1.0, gt=0, description="ε̄_SQP,tol = ε̂_SQP,tol.")
    eps_qp_tol: float = Field(1e-2, gt=0, description="ε_QP,tol del ADMM.")
    qp_max_iter: int = Field(4000, gt=0, description="Iteraciones ADMM máximas por QP.")
    qp_polish: bool = Field(False, description="Pulir cada solución QP.")
    horizon_m: float = Field(400.0, gt=0, description="Longitud del horizonte de planificación.")
    errors_velocity_only: bool = Field(False, description="Normas de error SQP solo sobre velocidades.")

    @model_validator(mode='after')
    def _check_grouping(self):
        group = self.slack_group_size
        if math.ceil((self.points - 1) / group) != self.slack_count:
            raise ValueError(
                f"Con M={self.points} y N={self.slack_count} no existe Ñ tal que ⌈(M−1)/Ñ⌉ = N."
            )
        if self.mode == PlannerMode.EMERGENCY and self.rho_j != 0:
            raise ValueError("El perfil de emergencia no penaliza el tirón (ρ_j = 0).")
        return self

    @classmethod
    def performance(cls, **overrides) -> "PlannerSettings":
        values = dict(mode=PlannerMode.PERFORMANCE, points=115, slack_count=12, delta_a=0.1, eps_max_pct=3.0,
                      rho_j=3e2, rho_eps_l=1e5, rho_eps_q=1e4, max_iter=20, time_budget_s=0.3, beta=0.5,
                      eps_sqp_tol=1.0, eps_qp_tol=1e-2, horizon_m=400.0)
        values.update(overrides)
        return cls(**values)

    @classmethod
    def emergency(cls, **overrides) -> "PlannerSettings":
        values = dict(mode=PlannerMode.EMERGENCY, points=50, slack_count=5, delta_a=None, eps_max_pct=3.0,
                      rho_j=0.0, rho_eps_l=5e4, rho_eps_q=1e3, max_iter=20, time_budget_s=0.1, beta=0.5,
                      eps_sqp_tol=1.5, eps_qp_tol=1e-2, horizon_m=300.0)
        values.update(overrides)
        return cls(**values)

    @property
    def slack_group_size(self) -> int:
        """Ñ: velocidades por grupo de holgura."""
        return math.ceil((self.points - 1) / self.slack_count)

    @property
    def step_length(self) -> float:
        return self.horizon_m / (self.points - 1)

    def steps(self) -> np.ndarray:
        """Esquema uniforme de Δs_m que cubre el horizonte con M puntos."""
        return np.full(self.points - 1, self.step_length)

    def admm_settings(self) -> AdmmSettings:
        return AdmmSettings.with_tolerance(self.eps_qp_tol, max_iter=self.qp_max_iter, polish=self.qp_polish)

    def sqp_config(self) -> SqpConfig:
        return SqpConfig(
            beta=self.beta,
            eps_bar_tol=self.eps_sqp_tol,
            eps_hat_tol=self.eps_sqp_tol,
            max_iter=self.max_iter,
            time_budget_s=self.time_budget_s,
            errors_velocity_only=self.errors_velocity_only,
            qp=self.admm_settings(),
        )
