# FILE: velox_core/orchestrator.py

"""
Cierre de lazo con horizonte móvil: en cada ciclo se aplican los parches del
mapa que no tocan el horizonte, se replanifican los perfiles Performance y
Emergency desde el estado actual y el vehículo avanza sobre el plan activo.

El vehículo simulado es el propio plan (fuerza constante por tramo); no hay
dinámica independiente ni ruido de sensores.
"""
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from .config import ScenarioConfig
from .errors import HorizonExceedsTrackError, HorizonOverlapError, PlanInfeasibleError
from .planner.assembler import build_discrete_problem
from .planner.settings import PlannerMode, PlannerSettings
from .planner.sqp import PlanResult, PlanStatus, SqpPlanner, warm_start_guess
from .simulation.state import (
    PatchAudit,
    RaceReport,
    RaceSettings,
    ReplanPolicy,
    SimState,
    TraversedPiece,
)
from .track.track_map import AccelLimitMap, LocalPath, MapPatch, TrackMap, sample_local_path, update_limits
from .utils.logger import logger
from .vehicle.params import VehicleParams
from .vehicle.physics import segment_time, terminal_speed

# Envolvente orientativa de iteraciones SQP por modo; superarla solo se avisa.
ITERATION_ENVELOPE = {PlannerMode.PERFORMANCE: 8, PlannerMode.EMERGENCY: 12}
_DIST_TOL = 1e-9


class ReplanOutcome(BaseModel):
    """Resultado de un ciclo: planes por modo, modo seguido y estado tras el avance."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    cycle: int
    plans: Dict[PlannerMode, PlanResult]
    active_mode: PlannerMode
    reused_previous: bool
    state: SimState
    pieces: List[TraversedPiece]


class _ModeSlot:
    """Planificador de un modo con su último plan factible y el historial de diagnóstico."""

    def __init__(self, settings: PlannerSettings):
        self.settings = settings
        self.planner = SqpPlanner(settings.sqp_config())
        self.last_plan: Optional[PlanResult] = None
        self.origin_total = 0.0
        self.history: List[Dict[str, Any]] = []


class _FollowedPlan(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    plan: PlanResult
    path: LocalPath
    origin_total: float
    mode: PlannerMode
    slack_group: int


class RaceOrchestrator:
    def __init__(self, track: TrackMap, limit_map: AccelLimitMap, vehicle: VehicleParams,
                 performance: Optional[PlannerSettings] = None, emergency: Optional[PlannerSettings] = None,
                 replan: Optional[ReplanPolicy] = None, race: Optional[RaceSettings] = None,
                 start: Optional[SimState] = None, patches: Optional[List[Tuple[float, MapPatch]]] = None,
                 emergency_distance_m: Optional[float] = None, energy_budget_J: Optional[float] = None):
        logger.info("Inicializando el orquestador de carrera...")
        self.track = track
        self.limit_map = limit_map
        self.vehicle = vehicle
        self.replan = replan or ReplanPolicy()
        self.race = race or RaceSettings()
        self.start = start or SimState()
        self.emergency_distance_m = emergency_distance_m
        self.energy_budget_J = energy_budget_J

        self._slots = {
            PlannerMode.PERFORMANCE: _ModeSlot(performance or PlannerSettings.performance()),
            PlannerMode.EMERGENCY: _ModeSlot(emergency or PlannerSettings.emergency()),
        }
        self._horizon_m = max(slot.settings.horizon_m for slot in self._slots.values())
        self._v_end = terminal_speed(vehicle)
        self._pending = sorted(patches or [], key=lambda item: item[0])
        self._audit: List[PatchAudit] = []

        self._followed: Optional[_FollowedPlan] = None
        self._emergency_active = False
        self._stopped = False
        self._failures = 0
        self._consecutive_failures = 0

        self._lap_times: List[float] = []
        self._lap_energy: List[float] = []
        self._lap_start_t = 0.0
        self._lap_start_E = 0.0
        self._next_line_total = self._first_line_crossing()
        self._profile: List[TraversedPiece] = []
        self._diagnostics: List[Dict[str, Any]] = []
        logger.info("Orquestador de carrera listo.", extra={'data': {
            'closed': track.closed, 'lap_length_m': track.lap_length,
            'patches': len(self._pending), 'emergency_distance_m': emergency_distance_m}})

    @classmethod
    def from_scenario(cls, config: ScenarioConfig, seed: Optional[int] = None) -> "RaceOrchestrator":
        inputs = config.build_inputs(seed)
        return cls(
            track=inputs.track,
            limit_map=inputs.limit_map,
            vehicle=inputs.vehicle,
            performance=config.performance,
            emergency=config.emergency,
            replan=config.replan,
            race=config.race,
            start=config.start_state(),
            patches=inputs.patches,
            emergency_distance_m=inputs.emergency_distance_m,
            energy_budget_J=inputs.energy_budget_J,
        )

    @property
    def emergency_active(self) -> bool:
        return self._emergency_active

    def planner(self, mode: PlannerMode) -> SqpPlanner:
        return self._slots[mode].planner

    def _first_line_crossing(self) -> float:
        if not self.track.closed:
            return np.inf
        to_line = self.track.s_end - float(self.start.s_glo)
        return to_line if to_line > _DIST_TOL else self.track.lap_length

    # --- SECCIÓN: PARCHES DEL MAPA ---

    def _apply_patches(self, state: SimState, trace_id: str) -> int:
        """Aplica los parches vencidos que no solapan el horizonte; los demás se aplazan."""
        horizon = (float(state.s_glo), float(state.s_glo) + self._horizon_m)
        lap_length = self.track.lap_length if self.track.closed else None
        applied = 0
        still_pending = []
        for t_apply, patch in self._pending:
            if t_apply > state.t:
                still_pending.append((t_apply, patch))
                continue
            try:
                self.limit_map = update_limits(self.limit_map, patch, horizon, lap_length)
            except HorizonOverlapError as e:
                logger.info(str(e), extra={'trace_id': trace_id, 'data': {'t_apply': t_apply}})
                still_pending.append((t_apply, patch))
                continue
            applied += 1
            self._audit.append(PatchAudit(t_requested=t_apply, t_applied=state.t, stamp=self.limit_map.stamp,
                                          s_range=patch.s_range, horizon=horizon))
            logger.info(f"Parche del mapa aplicado; stamp {self.limit_map.stamp}.", extra={
                'trace_id': trace_id, 'data': {'s_range': patch.s_range, 'horizon': horizon}})
        self._pending = still_pending
        return applied

    # --- SECCIÓN: PLANIFICACIÓN POR MODO ---

    def _held_prefix(self, mode: PlannerMode, path: LocalPath, state: SimState) -> Optional[np.ndarray]:
        """v_1 … v_{h−1} del plan seguido en las nuevas coordenadas; v² es lineal dentro de cada tramo."""
        held = self.replan.hold_points - 1
        followed = self._followed
        if held <= 0 or followed is None or followed.mode != mode:
            return None
        query = state.s_total - followed.origin_total + path.s_m[1:held + 1]
        if query[-1] > followed.plan.s_m[-1] + _DIST_TOL:
            return None
        w = np.interp(query, followed.plan.s_m, np.square(followed.plan.v))
        return np.minimum(np.sqrt(np.maximum(w, 0.0)), path.v_max[1:held + 1])

    def _plan_mode(self, mode: PlannerMode, state: SimState, trace_id: str) -> Tuple[PlanResult, LocalPath]:
        slot = self._slots[mode]
        path = sample_local_path(self.track, self.limit_map, state.s_glo, slot.settings.steps())
        held = self._held_prefix(mode, path, state)

        a_x_ini = state.a_x
        if held is not None:
            # a_x[0] queda fijado por v_1; la fila de aceleración inicial debe coincidir
            a_x_ini = float((held[0] ** 2 - state.v ** 2) / (2.0 * path.ds[0]))

        init = v_guess = None
        if slot.last_plan is not None:
            init = warm_start_guess(slot.last_plan, state.s_total - slot.origin_total, path, self.vehicle,
                                    v_ini=state.v, v_end=self._v_end, a_x_ini=a_x_ini,
                                    delta_a=slot.settings.delta_a, mode=mode)
            if held is not None:
                init[1:held.size + 1] = held
            v_guess = init.copy()
            v_guess[1:] = np.maximum(v_guess[1:], slot.planner.config.min_linearization_speed)

        dp = build_discrete_problem(path, self.vehicle, slot.settings, v_ini=state.v, a_x_ini=a_x_ini,
                                    v_guess=v_guess, hold_velocities=held, v_end=self._v_end)
        warm_duals = None if slot.last_plan is None else slot.last_plan.duals
        plan = slot.planner.solve(dp, init=init, warm_duals=warm_duals, trace_id=trace_id)
        return plan, path

    def _solve_modes(self, modes: List[PlannerMode], state: SimState,
                     trace_id: str) -> Dict[PlannerMode, Tuple[PlanResult, LocalPath]]:
        if self.replan.parallel_modes and len(modes) > 1:
            with ThreadPoolExecutor(max_workers=len(modes)) as pool:
                futures = {mode: pool.submit(self._plan_mode, mode, state, trace_id) for mode in modes}
                return {mode: future.result() for mode, future in futures.items()}
        return {mode: self._plan_mode(mode, state, trace_id) for mode in modes}

    def _record(self, mode: PlannerMode, plan: PlanResult):
        self._slots[mode].history.append({
            'status': plan.status.value,
            'iters': plan.iters,
            'qp_iters': sum(record.qp_iters for record in plan.per_iter_diag),
            'solve_time_s': plan.solve_time_s,
            'max_slack_pct': plan.max_slack_pct,
        })

    # --- SECCIÓN: AVANCE DEL VEHÍCULO ---

    def _cross_finish_line(self, s_total: float, t: float, E: float, v_s: float, a_k: float, F_k: float,
                           d: float, lap: int, trace_id: str) -> int:
        """Registra las vueltas cuya línea de meta cae dentro del trozo; tiempos y energía interpolados."""
        while s_total + d >= self._next_line_total - _DIST_TOL:
            d_c = max(self._next_line_total - s_total, 0.0)
            v_c = float(np.sqrt(max(v_s ** 2 + 2.0 * a_k * d_c, 0.0)))
            t_c = t + float(segment_time(v_s, v_c, d_c)) if d_c > 0 else t
            E_c = E + max(F_k, 0.0) * d_c
            self._lap_times.append(t_c - self._lap_start_t)
            self._lap_energy.append(E_c - self._lap_start_E)
            self._lap_start_t, self._lap_start_E = t_c, E_c
            self._next_line_total += self.track.lap_length
            lap += 1
            logger.info(f"Vuelta {lap} completada en {self._lap_times[-1]:.3f} s.", extra={
                'trace_id': trace_id, 'data': {'lap_energy_J': self._lap_energy[-1]}})
        return lap

    def _advance(self, followed: _FollowedPlan, state: SimState, cycle: int,
                 trace_id: str) -> Tuple[SimState, List[TraversedPiece]]:
        """
        Recorre el plan seguido desde la posición actual durante la distancia (o el
        periodo) de replanificación. Dentro de cada tramo la aceleración es
        constante: v_e = sqrt(v_s² + 2·a·d) y dt = 2·d/(v_s + v_e).
        """
        plan, path = followed.plan, followed.path
        s_m, v, a, F = plan.s_m, plan.v, plan.a_x, plan.F_x
        M = s_m.size
        dist_left = self.replan.replan_distance_m if self.replan.replan_distance_m is not None else np.inf
        time_left = self.replan.replan_period_s if self.replan.replan_period_s is not None else np.inf

        s = state.s_total - followed.origin_total
        k = int(np.clip(np.searchsorted(s_m, s, side='right') - 1, 0, M - 2))
        v_s = float(np.sqrt(max(v[k] ** 2 + 2.0 * a[k] * (s - s_m[k]), 0.0)))
        s_total, t, E, lap = state.s_total, state.t, state.E_loc, state.lap
        pieces: List[TraversedPiece] = []
        stopped = False

        while k < M - 1 and dist_left > _DIST_TOL and time_left > 0:
            a_k, F_k = float(a[k]), float(F[k])
            if v_s <= 0 and a_k <= 0:
                stopped = True
                break
            d = min(float(s_m[k + 1]) - s, dist_left)
            stops_here = a_k < 0 and v_s ** 2 + 2.0 * a_k * d <= 0
            if stops_here:
                d = v_s ** 2 / (-2.0 * a_k)
            v_e = float(np.sqrt(max(v_s ** 2 + 2.0 * a_k * d, 0.0)))
            dt = float(segment_time(v_s, v_e, d))
            if dt > time_left:
                dt = time_left
                v_e = max(v_s + a_k * dt, 0.0)
                d = 0.5 * (v_s + v_e) * dt
                stops_here = False

            if d > 0:
                pieces.append(TraversedPiece(
                    cycle=cycle, mode=followed.mode.value,
                    s_glo=float(self.track.wrap(plan.origin_glo + s)), s_total=s_total, t=t,
                    v=v_s, ax=a_k, ay=float(path.kappa[k]) * v_s ** 2, F=F_k, P=F_k * v_s,
                    eps=float(plan.eps[min(k // followed.slack_group, plan.eps.size - 1)]), ds=d,
                ))
                lap = self._cross_finish_line(s_total, t, E, v_s, a_k, F_k, d, lap, trace_id)

            s += d
            s_total += d
            t += dt
            E += max(F_k, 0.0) * d
            dist_left -= d
            time_left -= dt
            v_s = v_e

            if stops_here or (followed.mode == PlannerMode.EMERGENCY and v_s <= self.race.stop_speed_mps):
                stopped = True
                break
            if s >= s_m[k + 1] - _DIST_TOL:
                k += 1

        if stopped:
            self._stopped = True
            logger.info(f"Vehículo detenido a {v_s:.3f} m/s.", extra={'trace_id': trace_id, 'data': {'s_total': s_total}})
        a_next = float(a[min(k, M - 2)])
        new_state = SimState(s_glo=float(self.track.wrap(self.start.s_glo + s_total)), s_total=s_total, v=v_s,
                             a_x=a_next, t=t, lap=lap, E_loc=E)
        return new_state, pieces

    # --- SECCIÓN: CICLO DE REPLANIFICACIÓN ---

    def step_replan(self, state: SimState, cycle: int) -> ReplanOutcome:
        """
        Un ciclo completo. Un plan infactible del modo activo activa el manejo de
        fallos: se sigue el resto del plan anterior hasta agotar los reintentos.
        """
        trace_id = f"cycle-{cycle:05d}"

        # --- FASE 1: ACTUALIZACIÓN DEL MAPA ---
        applied = self._apply_patches(state, trace_id)

        # --- FASE 2: PLANIFICACIÓN ---
        if (not self._emergency_active and self.emergency_distance_m is not None
                and state.s_total >= self.emergency_distance_m):
            self._emergency_active = True
            logger.warning("Perfil de emergencia activado.", extra={
                'trace_id': trace_id, 'data': {'s_total': state.s_total, 'v': state.v}})
        modes = [PlannerMode.EMERGENCY] if self._emergency_active else [PlannerMode.PERFORMANCE, PlannerMode.EMERGENCY]
        solved = self._solve_modes(modes, state, trace_id)
        for mode, (plan, _) in solved.items():
            self._record(mode, plan)
            if plan.status != PlanStatus.INFEASIBLE:
                slot = self._slots[mode]
                slot.last_plan, slot.origin_total = plan, state.s_total

        # --- FASE 3: SELECCIÓN DEL PLAN ---
        active_mode = PlannerMode.EMERGENCY if self._emergency_active else PlannerMode.PERFORMANCE
        plan, path = solved[active_mode]
        reused = plan.status == PlanStatus.INFEASIBLE
        if reused:
            self._failures += 1
            self._consecutive_failures += 1
            if self._followed is None or self._consecutive_failures > self.race.max_failure_retries:
                logger.error("Plan infactible sin alternativa; se aborta la carrera.", extra={
                    'trace_id': trace_id, 'data': {'consecutive_failures': self._consecutive_failures}})
                raise PlanInfeasibleError(
                    f"Plan {active_mode.value} infactible en el ciclo {cycle} tras "
                    f"{self._consecutive_failures} fallos consecutivos."
                )
            logger.error("Plan infactible: se reutiliza el resto del plan anterior.", extra={
                'trace_id': trace_id, 'data': {'mode': active_mode.value, 'failures': self._failures}})
        else:
            self._consecutive_failures = 0
            self._followed = _FollowedPlan(plan=plan, path=path, origin_total=state.s_total, mode=active_mode,
                                           slack_group=self._slots[active_mode].settings.slack_group_size)

        # --- FASE 4: AVANCE ---
        new_state, pieces = self._advance(self._followed, state, cycle, trace_id)
        self._profile.extend(pieces)

        diag = {
            'cycle': cycle,
            't_s': state.t,
            's_glo_m': state.s_glo,
            's_total_m': state.s_total,
            'v_mps': state.v,
            'active_mode': active_mode.value,
            'reused_previous': reused,
            'patches_applied': applied,
            'map_stamp': self.limit_map.stamp,
            'plans': {mode.value: plan_.summary() for mode, (plan_, _) in solved.items()},
        }
        self._diagnostics.append(diag)
        logger.debug(f"Ciclo {cycle} completado.", extra={'trace_id': trace_id, 'data': {
            'active_mode': active_mode.value, 'v': new_state.v, 's_total': new_state.s_total}})

        return ReplanOutcome(cycle=cycle, plans={mode: result for mode, (result, _) in solved.items()},
                             active_mode=active_mode, reused_previous=reused, state=new_state, pieces=pieces)

    # --- SECCIÓN: CARRERA COMPLETA ---

    def run_race(self) -> RaceReport:
        """Encadena ciclos hasta detenerse, completar las vueltas, agotar la pista abierta o max_cycles."""
        start_time = time.perf_counter()
        logger.info("Iniciando la carrera simulada.", extra={'trace_id': 'race', 'data': {
            'laps': self.race.laps, 'replan': self.replan.model_dump()}})
        state = self.start
        end_reason = "max_cycles"
        cycles = 0
        for cycle in range(self.race.max_cycles):
            try:
                outcome = self.step_replan(state, cycle)
            except HorizonExceedsTrackError as e:
                end_reason = "track_end"
                logger.info(str(e), extra={'trace_id': f"cycle-{cycle:05d}"})
                break
            cycles += 1
            state = outcome.state
            if self._stopped:
                end_reason = "stopped"
                break
            if not self._emergency_active and self.track.closed and state.lap >= self.race.laps:
                end_reason = "laps_completed"
                break

        report = self._build_report(state, cycles, end_reason)
        logger.info(f"Carrera terminada ({end_reason}) tras {cycles} ciclos.", extra={'trace_id': 'race', 'data': {
            'total_time_s': report.total_time_s, 'lap_times_s': report.lap_times_s, 'E_loc_J': report.E_loc_J,
            'wall_time_s': time.perf_counter() - start_time}})
        return report

    def _mode_stats(self, mode: PlannerMode) -> Dict[str, Any]:
        history = self._slots[mode].history
        if not history:
            return {'plans': 0}
        iters = np.array([h['iters'] for h in history])
        times = np.array([h['solve_time_s'] for h in history])
        qp_iters = np.array([h['qp_iters'] for h in history])
        status_counts: Dict[str, int] = {}
        for h in history:
            status_counts[h['status']] = status_counts.get(h['status'], 0) + 1
        over = int(np.sum(iters > ITERATION_ENVELOPE[mode]))
        if over:
            logger.warning(f"{over} planes {mode.value} superaron {ITERATION_ENVELOPE[mode]} iteraciones SQP.",
                           extra={'trace_id': 'race'})
        return {
            'plans': len(history),
            'status_counts': status_counts,
            'iters_mean': float(iters.mean()),
            'iters_max': int(iters.max()),
            'iters_over_envelope': over,
            'qp_iters_per_sqp_iter': float(qp_iters.sum() / max(iters.sum(), 1)),
            'solve_time_mean_s': float(times.mean()),
            'solve_time_max_s': float(times.max()),
            'max_slack_pct': float(max(h['max_slack_pct'] for h in history)),
        }

    def _build_report(self, state: SimState, cycles: int, end_reason: str) -> RaceReport:
        slacks = [h['max_slack_pct'] for slot in self._slots.values() for h in slot.history]
        # El valor del escenario sustituye al derivado de la estrategia energética
        if self.race.energy_budget_J is not None:
            budget, source = self.race.energy_budget_J, 'config'
        elif self.energy_budget_J is not None:
            budget, source = self.energy_budget_J, 'strategy'
        else:
            budget, source = None, None
        within = None
        if budget is not None and self._lap_energy:
            within = all(energy <= budget for energy in self._lap_energy)
        return RaceReport(
            lap_times_s=list(self._lap_times),
            total_time_s=state.t,
            distance_m=state.s_total,
            cycles=cycles,
            stopped=self._stopped,
            end_reason=end_reason,
            E_loc_J=state.E_loc,
            lap_energy_J=list(self._lap_energy),
            energy_budget_J=budget,
            energy_budget_source=source,
            within_energy_budget=within,
            max_slack_pct=float(max(slacks, default=0.0)),
            mean_slack_pct=float(np.mean(slacks)) if slacks else 0.0,
            failures=self._failures,
            sqp_stats={mode.value: self._mode_stats(mode) for mode in self._slots},
            patch_audit=list(self._audit),
            profile=list(self._profile),
            cycle_diagnostics=list(self._diagnostics),
        )


def run_race(config: ScenarioConfig, seed: Optional[int] = None) -> RaceReport:
    return RaceOrchestrator.from_scenario(config, seed).run_race()
