# FILE: velox_core/planner/sqp.py

import json
import time
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..solvers.admm import AdmmSolver
from ..solvers.qp_types import QpStatus
from ..track.track_map import LocalPath
from ..utils.logger import logger
from ..vehicle.params import VehicleParams
from ..vehicle.physics import lateral_accel, power, travel_time
from .assembler import (
    DiscreteProblem,
    assemble,
    constraint_violations,
    discrete_accel,
    objective_terms,
    segment_forces,
)
from .envelope import braking_envelope, braking_profile, feasible_profile, speed_caps
from .settings import PlannerMode, SqpConfig


class PlanStatus(str, Enum):
    CONVERGED = "Converged"
    ITER_LIMIT = "IterLimit"
    TIME_LIMIT = "TimeLimit"
    INFEASIBLE = "Infeasible"


class SqpIterationRecord(BaseModel):
    iter: int
    alpha: float
    gamma: int
    eps_bar: float
    eps_hat: float
    qp_iters: int
    qp_status: str
    obj_terms: Dict[str, float]


class PlanResult(BaseModel):
    """Perfil optimizado con sus magnitudes derivadas y el diagnóstico SQP."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    mode: PlannerMode
    status: PlanStatus
    s_m: np.ndarray
    s_glo: Optional[np.ndarray] = None
    v: np.ndarray
    eps: np.ndarray = Field(..., description="Holguras en % (100·ζ·ε).")
    F_x: np.ndarray
    P: np.ndarray
    a_x: np.ndarray
    a_y: np.ndarray
    t: np.ndarray
    iters: int
    per_iter_diag: List[SqpIterationRecord] = Field(default_factory=list)
    objective_terms: Dict[str, float] = Field(default_factory=dict)
    qp_status: Optional[QpStatus] = None
    certificate: Optional[np.ndarray] = None
    hessian_condition: Optional[float] = None
    solve_time_s: float = 0.0
    max_slack_pct: float = 0.0
    violations: Dict[str, float] = Field(default_factory=dict)
    origin_glo: float = 0.0
    stamp: int = 0
    duals: Optional[np.ndarray] = None

    @property
    def horizon_time_s(self) -> float:
        return float(self.t[-1])

    @property
    def converged(self) -> bool:
        return self.status == PlanStatus.CONVERGED

    def iteration_records_jsonl(self) -> str:
        return "\n".join(json.dumps(record.model_dump()) for record in self.per_iter_diag)

    def summary(self) -> Dict:
        return {
            'mode': self.mode.value,
            'status': self.status.value,
            'iterations': self.iters,
            'origin_glo_m': self.origin_glo,
            'horizon_time_s': self.horizon_time_s,
            'max_slack_pct': self.max_slack_pct,
            'objective_terms': self.objective_terms,
            'qp_status': self.qp_status.value if self.qp_status else None,
            'hessian_condition': self.hessian_condition,
            'solve_time_s': self.solve_time_s,
            'violations': self.violations,
            'map_stamp': self.stamp,
        }


# --- NORMAS DE ERROR ---

def evaluate_errors(o_next: np.ndarray, o_prev: np.ndarray, K: int) -> Tuple[float, float]:
    """ε̄ = ‖o_next − o_prev‖₂ / K  y  ε̂ = ‖o_next − o_prev‖∞."""
    diff = np.asarray(o_next, dtype=float) - np.asarray(o_prev, dtype=float)
    if diff.size == 0:
        return 0.0, 0.0
    return float(np.linalg.norm(diff) / K), float(np.max(np.abs(diff)))


# --- ESTIMACIONES INICIALES ---

def _accel_floor(path: LocalPath, params: VehicleParams) -> float:
    return params.accel_min_floor_ms2 or float(min(np.min(path.ax_bar), np.min(path.ay_bar)))


def cold_start_guess(path: LocalPath, params: VehicleParams, v_ini: Optional[float] = None,
                     v_end: Optional[float] = None, a_x_ini: float = 0.0, delta_a: Optional[float] = None,
                     mode: PlannerMode = PlannerMode.PERFORMANCE) -> np.ndarray:
    """
    Perfil factible para linealizar la primera iteración.

    Sin v_ini es el tope por curvatura min(v_max, sqrt(ā_y/|κ|)), recortado por
    la frenada hasta v_end si se da. Con v_ini, Performance recorre la
    envolvente atrás/delante con el enlace δ_a y la potencia P_max/v_k;
    Emergency frena al máximo hasta parar.
    """
    floor = _accel_floor(path, params)
    _, w_cap = speed_caps(path, floor)
    if v_ini is None:
        w = w_cap if v_end is None else braking_envelope(path, params, w_cap, v_end, floor)
        return np.sqrt(w)
    if mode == PlannerMode.EMERGENCY:
        return np.sqrt(braking_profile(path, params, w_cap, v_ini, floor))
    return feasible_profile(path, params, v_ini, v_end, floor, a_x_ini, delta_a)


def warm_start_guess(previous: PlanResult, shift_m: float, path: LocalPath, params: VehicleParams,
                     v_ini: Optional[float] = None, v_end: Optional[float] = None, a_x_ini: float = 0.0,
                     delta_a: Optional[float] = None,
                     mode: PlannerMode = PlannerMode.PERFORMANCE) -> np.ndarray:
    """Plan anterior desplazado por la distancia recorrida y acotado por la envolvente del arranque en frío."""
    envelope = cold_start_guess(path, params, v_ini, v_end, a_x_ini, delta_a, mode)
    s_query = path.s_m + shift_m
    # Más allá del plan anterior se mantiene su última velocidad
    shifted = np.interp(s_query, previous.s_m, previous.v, right=float(previous.v[-1]))
    guess = np.minimum(envelope, shifted)
    if v_ini is not None:
        guess[0] = v_ini
    return guess


# --- BUCLE SQP ---

class SqpPlanner:
    """
    Bucle SQP sobre el QP local: ensamblar en o^k, resolver el paso delta,
    controlar el paso con α = β^γ y comprobar la convergencia.

    El iterado o^k no se recorta; solo el punto de linealización sube las
    velocidades hasta `min_linearization_speed`.
    """

    def __init__(self, config: Optional[SqpConfig] = None, solver: Optional[AdmmSolver] = None):
        self.config = config or SqpConfig()
        self.solver = solver or AdmmSolver(self.config.qp)

    def _linearization_point(self, dp: DiscreteProblem, o: np.ndarray) -> np.ndarray:
        o_lin = o.copy()
        o_lin[:dp.n_vel] = np.maximum(o_lin[:dp.n_vel], self.config.min_linearization_speed)
        return o_lin

    def _errors(self, dp: DiscreteProblem, candidate: np.ndarray, o: np.ndarray) -> Tuple[float, float]:
        if self.config.errors_velocity_only:
            return evaluate_errors(candidate[:dp.n_vel], o[:dp.n_vel], dp.n_vel)
        return evaluate_errors(candidate, o, dp.K)

    @staticmethod
    def _initial_iterate(dp: DiscreteProblem, init: np.ndarray) -> np.ndarray:
        init = np.asarray(init, dtype=float)
        if init.size == dp.M:
            return np.concatenate((init[1:], np.zeros(dp.N)))
        if init.size == dp.K:
            return init.copy()
        raise ValueError(f"La estimación inicial debe tener M={dp.M} o K={dp.K} elementos.")

    def solve(self, dp: DiscreteProblem, init: Optional[np.ndarray] = None,
              warm_duals: Optional[np.ndarray] = None, trace_id: Optional[str] = None) -> PlanResult:
        """
        Ejecuta el SQP desde `init` (velocidades de longitud M o vector z
        completo). Devuelve siempre un PlanResult; la infactibilidad certificada
        por el QP se refleja en el estado, no como excepción.

        Un QP infactible tras un paso aceptado no corta el bucle: el iterado
        retrocede hacia el anterior (factor β) hasta `max_infeasible_backoff`
        veces. Si el QP de la primera iteración es infactible partiendo de una
        estimación externa, se reintenta una vez desde el arranque en frío.
        """
        cfg = self.config
        trace_id = trace_id or f"plan-{dp.mode.value.lower()}-{dp.path.origin_glo:.1f}"
        start_time = time.perf_counter()

        # --- FASE 1: PUNTO INICIAL ---
        cold = cold_start_guess(dp.path, dp.params, dp.v_ini, dp.v_end, dp.a_x_ini, dp.settings.delta_a, dp.mode)
        cold_available = init is not None
        o = self._initial_iterate(dp, cold if init is None else init)

        duals = warm_duals
        previous_errors = None
        anchor = None
        backoffs = 0
        status = PlanStatus.ITER_LIMIT
        records: List[SqpIterationRecord] = []
        certificate = None
        qp_status = None
        hessian_cond = None
        iteration = 0

        # --- FASE 2: ITERACIONES ---
        for iteration in range(1, cfg.max_iter + 1):
            if iteration > 1 and time.perf_counter() - start_time > cfg.time_budget_s:
                status = PlanStatus.TIME_LIMIT
                iteration -= 1
                break

            o_lin = self._linearization_point(dp, o)
            dp_k = dp.with_linearization(o_lin)
            assembled = assemble(dp_k, with_condition=hessian_cond is None)
            if hessian_cond is None:
                hessian_cond = assembled.hessian_condition

            if duals is not None and duals.size != assembled.qp.m:
                duals = None
            solution = self.solver.solve(assembled.qp, warm_start=(None, duals), trace_id=trace_id)
            qp_status = solution.status

            if solution.status in (QpStatus.PRIMAL_INFEASIBLE, QpStatus.DUAL_INFEASIBLE):
                if anchor is not None and backoffs < cfg.max_infeasible_backoff:
                    backoffs += 1
                    retreat = anchor + cfg.beta * (o - anchor)
                    errors = self._errors(dp, retreat, o)
                    o = retreat
                    records.append(SqpIterationRecord(
                        iter=iteration, alpha=0.0, gamma=0, eps_bar=errors[0], eps_hat=errors[1],
                        qp_iters=solution.iterations, qp_status=solution.status.value,
                        obj_terms=objective_terms(dp, o)))
                    logger.warning(f"QP infactible en la iteración SQP {iteration}: se retrocede hacia el iterado anterior.",
                                   extra={'trace_id': trace_id, 'data': {'backoff': backoffs, 'qp_iters': solution.iterations}})
                    continue
                if anchor is None and cold_available:
                    cold_available = False
                    o = self._initial_iterate(dp, cold)
                    duals = None
                    logger.warning(f"QP infactible en la iteración SQP {iteration}: se reinicia desde el arranque en frío.",
                                   extra={'trace_id': trace_id, 'data': {'qp_status': solution.status.value}})
                    continue
                status = PlanStatus.INFEASIBLE
                certificate = solution.certificate
                logger.warning(f"QP infactible en la iteración SQP {iteration}: se rechaza el trayecto.", extra={
                    'trace_id': trace_id,
                    'data': {'qp_status': solution.status.value, 'qp_iters': solution.iterations}})
                break
            if solution.status == QpStatus.MAX_ITER:
                logger.warning("El ADMM agotó sus iteraciones; se usa el último iterado.", extra={
                    'trace_id': trace_id, 'data': {'iteration': iteration, 'qp_iters': solution.iterations}})

            # --- FASE 3: CONTROL DE PASO α = β^γ ---
            target = o_lin + solution.z
            accepted = False
            for gamma in range(cfg.max_backtracking + 1):
                alpha = cfg.beta ** gamma
                candidate = o + alpha * (target - o)
                errors = self._errors(dp, candidate, o)
                if previous_errors is None or (errors[0] <= previous_errors[0] and errors[1] <= previous_errors[1]):
                    accepted = True
                    break
            if not accepted:
                logger.warning(f"Paso mínimo α={alpha:.2e} aceptado sin reducir los errores.", extra={
                    'trace_id': trace_id, 'data': {'eps_bar': errors[0], 'eps_hat': errors[1]}})

            anchor = o
            o = candidate
            duals = solution.y
            previous_errors = errors
            record = SqpIterationRecord(
                iter=iteration, alpha=alpha, gamma=gamma, eps_bar=errors[0], eps_hat=errors[1],
                qp_iters=solution.iterations, qp_status=solution.status.value,
                obj_terms=objective_terms(dp, o),
            )
            records.append(record)
            logger.debug(f"Iteración SQP {iteration}.", extra={'trace_id': trace_id, 'data': record.model_dump()})

            if errors[0] <= cfg.eps_bar_tol and errors[1] <= cfg.eps_hat_tol:
                status = PlanStatus.CONVERGED
                break

        # --- FASE 4: PERFIL FINAL ---
        result = self._build_result(dp, o, status, records, iteration, qp_status, certificate,
                                    hessian_cond, duals, time.perf_counter() - start_time)
        log = logger.info if status == PlanStatus.CONVERGED else logger.warning
        log(f"Plan {dp.mode.value} terminado con estado {status.value} en {iteration} iteraciones.", extra={
            'trace_id': trace_id,
            'data': {'solve_time_s': result.solve_time_s, 'max_slack_pct': result.max_slack_pct}})
        return result

    def _settled_velocity(self, dp: DiscreteProblem, o: np.ndarray) -> np.ndarray:
        v = dp.full_velocity(o)
        v[1:] = np.maximum(v[1:], 0.0)
        if dp.mode == PlannerMode.EMERGENCY:
            # Por debajo del suelo de linealización la cola no vuelve a acelerar
            stopped = np.flatnonzero(v[1:] <= self.config.min_linearization_speed)
            if stopped.size:
                first = stopped[0] + 1
                v[first:] = np.minimum.accumulate(v[first:])
        return v

    def _build_result(self, dp: DiscreteProblem, o: np.ndarray, status: PlanStatus,
                      records: List[SqpIterationRecord], iteration: int, qp_status, certificate,
                      hessian_cond, duals, solve_time_s: float) -> PlanResult:
        v = self._settled_velocity(dp, o)
        o = np.concatenate((v[1:], o[dp.n_vel:]))
        eps_pct = 100.0 * dp.zeta * np.maximum(o[dp.n_vel:], 0.0)
        force = segment_forces(dp, v)
        return PlanResult(
            mode=dp.mode,
            status=status,
            s_m=np.asarray(dp.path.s_m),
            s_glo=None if dp.path.s_glo is None else np.asarray(dp.path.s_glo),
            v=v,
            eps=eps_pct,
            F_x=force,
            P=power(force, v[:-1]),
            a_x=discrete_accel(v, dp.path.ds),
            a_y=lateral_accel(dp.path.kappa, v),
            t=travel_time(v, dp.path.ds),
            iters=iteration,
            per_iter_diag=records,
            objective_terms=objective_terms(dp, o),
            qp_status=qp_status,
            certificate=certificate,
            hessian_condition=hessian_cond,
            solve_time_s=solve_time_s,
            max_slack_pct=float(np.max(eps_pct, initial=0.0)),
            violations=constraint_violations(dp, o),
            origin_glo=dp.path.origin_glo,
            stamp=dp.path.stamp,
            duals=duals,
        )


def sqp_solve(dp: DiscreteProblem, cfg: Optional[SqpConfig] = None,
              init: Optional[np.ndarray] = None) -> PlanResult:
    """Atajo funcional sobre SqpPlanner."""
    return SqpPlanner(cfg).solve(dp, init)
