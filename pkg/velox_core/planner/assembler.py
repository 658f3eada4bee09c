# FILE: velox_core/planner/assembler.py

"""
Construcción del QP local a partir del problema de velocidad no lineal.

Vector de optimización z = [v₁ … v_{M−1}, ε₀ … ε_{N−1}]; v₀ = v_ini queda fijo
fuera de z. Todas las filas se expresan en forma delta alrededor del punto de
linealización: l − g(o_lin) ≤ J·δ ≤ u − g(o_lin).

Desglose de filas (por familia, en este orden):
    velocity_box   v₁ … v_{M−2}                  M−2
    terminal       v_{M−1} ≤ min(v_end, v_max)   1
    initial_accel  a_x[0] ± δ_a (si δ_a activo)  1
    force_box      F₁ … F_{M−2} (F₀ … con δ_a inactivo)
    power          P₀ … P_{M−2}                  M−1
    diamond_±±     4 filas por tramo             4·(M−1)
    slack_box      ζε_n                          N
"""
from typing import Any, Dict, List, NamedTuple, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..solvers.qp_types import INFTY, INFTY_THRESHOLD, QpProblem
from ..track.track_map import LocalPath
from ..vehicle.params import VehicleParams, resolve_accel_floor
from ..vehicle.physics import terminal_speed
from .settings import PlannerMode, PlannerSettings

DIAMOND_SIGNS = {
    'diamond_pp': (1.0, 1.0),
    'diamond_pm': (1.0, -1.0),
    'diamond_mp': (-1.0, 1.0),
    'diamond_mm': (-1.0, -1.0),
}


def calibrate_zeta(eps_max_pct: float) -> float:
    """ζ tal que una holgura de valor 1 equivale a una violación de ε_max en unidades del rombo."""
    if eps_max_pct <= 0:
        raise ValueError("eps_max_pct debe ser positivo.")
    return eps_max_pct / 100.0


# --- PROBLEMA DISCRETO ---

class DiscreteProblem(BaseModel):
    """Datos de un QP local: trayecto, vehículo, estado inicial y punto de linealización."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    path: LocalPath
    params: VehicleParams
    settings: PlannerSettings
    v_ini: float = Field(..., ge=0, description="Velocidad fija del punto 0.")
    a_x_ini: float = Field(0.0, description="Aceleración planificada en el punto de enlace.")
    v_end: float = Field(..., gt=0, description="Velocidad terminal del peor caso.")
    zeta: float = Field(..., gt=0, description="Factor de unidades de las holguras ζ.")
    v_lin: np.ndarray
    eps_lin: np.ndarray
    hold_velocities: Optional[np.ndarray] = None

    @model_validator(mode='after')
    def _check_consistency(self):
        M, N = self.settings.points, self.settings.slack_count
        if self.path.M != M:
            raise ValueError(f"El trayecto tiene {self.path.M} puntos y la parametrización pide {M}.")
        if self.v_lin.shape != (M,) or self.eps_lin.shape != (N,):
            raise ValueError("v_lin debe tener M elementos y eps_lin N elementos.")
        if np.any(self.v_lin[1:] <= 0):
            raise ValueError("El punto de linealización requiere v > 0.")
        if self.params.accel_min_floor_ms2 is None:
            raise ValueError("ā_min sin resolver; usar resolve_accel_floor antes de ensamblar.")
        if self.hold_velocities is not None and self.hold_velocities.size > M - 2:
            raise ValueError("hold_points no puede cubrir el punto terminal.")
        return self

    @property
    def M(self) -> int:
        return self.settings.points

    @property
    def N(self) -> int:
        return self.settings.slack_count

    @property
    def N_tilde(self) -> int:
        return self.settings.slack_group_size

    @property
    def n_vel(self) -> int:
        return self.M - 1

    @property
    def K(self) -> int:
        return self.M - 1 + self.N

    @property
    def mode(self) -> PlannerMode:
        return self.settings.mode

    @property
    def has_initial_accel(self) -> bool:
        return self.settings.delta_a is not None

    @property
    def o_lin(self) -> np.ndarray:
        return np.concatenate((self.v_lin[1:], self.eps_lin))

    def slack_groups(self) -> np.ndarray:
        """Grupo de holgura de cada tramo k (velocidad k+1): ⌊k/Ñ⌋."""
        return np.arange(self.M - 1) // self.N_tilde

    def full_velocity(self, o: np.ndarray) -> np.ndarray:
        return np.concatenate(([self.v_ini], o[:self.n_vel]))

    def target_velocity(self) -> np.ndarray:
        """Objetivo de seguimiento de v₁ … v_{M−1}: v_max en Performance, 0 en Emergency."""
        if self.mode == PlannerMode.EMERGENCY:
            return np.zeros(self.n_vel)
        return np.asarray(self.path.v_max[1:], dtype=float)

    def with_linearization(self, o: np.ndarray) -> "DiscreteProblem":
        o = np.asarray(o, dtype=float)
        return self.model_copy(update={
            'v_lin': np.concatenate(([self.v_ini], o[:self.n_vel])),
            'eps_lin': o[self.n_vel:].copy(),
        })


def build_discrete_problem(path: LocalPath, params: VehicleParams, settings: PlannerSettings,
                           v_ini: float, a_x_ini: float = 0.0, v_guess: Optional[np.ndarray] = None,
                           hold_velocities: Optional[np.ndarray] = None,
                           v_end: Optional[float] = None) -> DiscreteProblem:
    params = resolve_accel_floor(params, path)
    v_lin = np.array(path.v_max if v_guess is None else v_guess, dtype=float)
    v_lin[0] = v_ini
    return DiscreteProblem(
        path=path,
        params=params,
        settings=settings,
        v_ini=float(v_ini),
        a_x_ini=float(a_x_ini),
        v_end=terminal_speed(params) if v_end is None else float(v_end),
        zeta=calibrate_zeta(settings.eps_max_pct),
        v_lin=v_lin,
        eps_lin=np.zeros(settings.slack_count),
        hold_velocities=None if hold_velocities is None else np.asarray(hold_velocities, dtype=float),
    )


# --- CINEMÁTICA DISCRETA ---

def discrete_accel(v: np.ndarray, ds: np.ndarray) -> np.ndarray:
    """a_x[m] = (v[m+1]² − v[m]²)/(2Δs_m): diferencia hacia delante sobre la energía cinética."""
    v = np.asarray(v, dtype=float)
    ds = np.asarray(ds, dtype=float)
    if v.size != ds.size + 1:
        raise ValueError("v debe tener un elemento más que ds.")
    return (np.square(v[1:]) - np.square(v[:-1])) / (2.0 * ds)


def segment_forces(dp: DiscreteProblem, v: np.ndarray) -> np.ndarray:
    """F_k = m_v·a_x[k] + c_r·v_k² por tramo."""
    p = dp.params
    return p.mass_kg * discrete_accel(v, dp.path.ds) + p.drag_lump_kg_per_m * np.square(v[:-1])


def diamond_limits(dp: DiscreteProblem) -> Tuple[np.ndarray, np.ndarray]:
    """ā_x, ā_y por tramo; el tramo final usa ā_min (límite físico más bajo)."""
    ax_lim = np.array(dp.path.ax_bar[:-1], dtype=float)
    ay_lim = np.array(dp.path.ay_bar[:-1], dtype=float)
    ax_lim[-1] = ay_lim[-1] = dp.params.accel_min_floor_ms2
    return ax_lim, ay_lim


def normalized_accelerations(dp: DiscreteProblem, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(â_x, â_y) por tramo sobre la velocidad completa v (longitud M)."""
    ax_lim, ay_lim = diamond_limits(dp)
    ax_hat = segment_forces(dp, v) / (dp.params.mass_kg * ax_lim)
    ay_hat = np.abs(dp.path.kappa[:-1]) * np.square(v[:-1]) / ay_lim
    return ax_hat, ay_hat


# --- OBJETIVO ---

def _band_triplets(n: int, diagonals: Dict[int, np.ndarray]):
    rows, cols, vals = [], [], []
    for offset, values in diagonals.items():
        idx = np.arange(n - abs(offset))
        rows.append(idx + max(-offset, 0))
        cols.append(idx + max(offset, 0))
        vals.append(np.broadcast_to(values, idx.shape))
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def second_difference(n: int) -> sp.csc_matrix:
    """Δ de tamaño (n−2)×n con la banda (1, −2, 1)."""
    return sp.diags([1.0, -2.0, 1.0], [0, 1, 2], shape=(n - 2, n), format='csc')


def build_objective(dp: DiscreteProblem) -> Tuple[sp.csc_matrix, np.ndarray]:
    """
    J = ‖v − v_obj‖² + ρ_j‖Δv‖² + ρ_ε,l·Σζε + ρ_ε,q‖ζε‖² en forma absoluta ½zᵀPz + qᵀz.

    La banda pentadiagonal de P se guarda completa (ceros explícitos incluidos)
    para que el patrón de dispersión no dependa de ρ_j.
    """
    s = dp.settings
    nv, N = dp.n_vel, dp.N

    jerk = (second_difference(nv).T @ second_difference(nv)).tocsc()
    diagonals = {k: 2.0 * s.rho_j * jerk.diagonal(k) for k in (-2, -1, 0, 1, 2)}
    diagonals[0] = diagonals[0] + 2.0
    rows, cols, vals = _band_triplets(nv, diagonals)

    slack_idx = nv + np.arange(N)
    rows = np.concatenate((rows, slack_idx))
    cols = np.concatenate((cols, slack_idx))
    vals = np.concatenate((vals, np.full(N, 2.0 * s.rho_eps_q * dp.zeta ** 2)))
    P = sp.csc_matrix((vals, (rows, cols)), shape=(dp.K, dp.K))

    q = np.concatenate((-2.0 * dp.target_velocity(), np.full(N, s.rho_eps_l * dp.zeta)))
    return P, q


def objective_terms(dp: DiscreteProblem, o: np.ndarray) -> Dict[str, float]:
    """Términos (J_v, J_j, J_ε,l, J_ε,q) evaluados en o = [v₁…, ε…]."""
    s = dp.settings
    v = np.asarray(o[:dp.n_vel], dtype=float)
    eps = np.asarray(o[dp.n_vel:], dtype=float)
    jerk = second_difference(dp.n_vel) @ v
    return {
        'J_v': float(np.sum(np.square(v - dp.target_velocity()))),
        'J_j': float(s.rho_j * np.sum(np.square(jerk))),
        'J_eps_l': float(s.rho_eps_l * dp.zeta * np.sum(eps)),
        'J_eps_q': float(s.rho_eps_q * np.sum(np.square(dp.zeta * eps))),
    }


def hessian_condition(P: sp.spmatrix) -> float:
    """Número de condición σ_H de la Hessiana (constante en todo el SQP)."""
    eigenvalues = np.linalg.eigvalsh(P.toarray())
    smallest = eigenvalues.min()
    return float(eigenvalues.max() / smallest) if smallest > 0 else float('inf')


# --- RESTRICCIONES ---

class _Family(NamedTuple):
    name: str
    g: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray


class LinearizedConstraints(NamedTuple):
    A: sp.csc_matrix
    l: np.ndarray
    u: np.ndarray
    g: np.ndarray
    row_index: Dict[str, Tuple[int, int]]


def _segment_entries(segments: np.ndarray, d_next: np.ndarray, d_prev: np.ndarray):
    """Entradas de Jacobiana de filas por tramo: v_{k+1} siempre, v_k solo si k ≥ 1 (v₀ es fijo)."""
    local = np.arange(segments.size)
    with_prev = segments >= 1
    rows = np.concatenate((local, local[with_prev]))
    cols = np.concatenate((segments, segments[with_prev] - 1))
    vals = np.concatenate((d_next[segments], d_prev[segments][with_prev]))
    return rows, cols, vals


def _families(dp: DiscreteProblem, o: np.ndarray) -> List[_Family]:
    p, path, s = dp.params, dp.path, dp.settings
    M, nv = dp.M, dp.n_vel
    o = np.asarray(o, dtype=float)
    v = dp.full_velocity(o)
    eps = o[nv:]
    ds = path.ds
    vk, vn = v[:-1], v[1:]

    accel = discrete_accel(v, ds)
    force = p.mass_kg * accel + p.drag_lump_kg_per_m * np.square(vk)
    dF_next = p.mass_kg * vn / ds
    dF_prev = -p.mass_kg * vk / ds + 2.0 * p.drag_lump_kg_per_m * vk
    all_segments = np.arange(M - 1)
    families = []

    # Caja de velocidad v₁ … v_{M−2}, con los puntos retenidos fijados
    inner = np.arange(1, M - 1)
    lower = np.zeros(inner.size)
    upper = np.array(path.v_max[1:M - 1], dtype=float)
    if dp.hold_velocities is not None and dp.hold_velocities.size:
        h = dp.hold_velocities.size
        lower[:h] = upper[:h] = dp.hold_velocities
    families.append(_Family('velocity_box', v[inner], lower, upper,
                            np.arange(inner.size), inner - 1, np.ones(inner.size)))

    # Velocidad terminal
    families.append(_Family('terminal', v[M - 1:M], np.zeros(1), np.array([min(dp.v_end, path.v_max[M - 1])]),
                            np.zeros(1, dtype=int), np.array([M - 2]), np.ones(1)))

    # Aceleración inicial, una fila de dos lados sobre a_x[0]
    if dp.has_initial_accel:
        families.append(_Family('initial_accel', accel[:1],
                                np.array([dp.a_x_ini - s.delta_a]), np.array([dp.a_x_ini + s.delta_a]),
                                np.zeros(1, dtype=int), np.zeros(1, dtype=int), np.array([vn[0] / ds[0]])))

    # Caja de fuerza; F₀ ya queda fijada por la fila de aceleración inicial
    force_segments = all_segments[1:] if dp.has_initial_accel else all_segments
    rows, cols, vals = _segment_entries(force_segments, dF_next, dF_prev)
    families.append(_Family('force_box', force[force_segments],
                            np.full(force_segments.size, p.force_min_N), np.full(force_segments.size, p.force_max_N),
                            rows, cols, vals))

    # Potencia F·v_k ≤ min(P_max, P_ES)
    dP_next = dF_next * vk
    dP_prev = dF_prev * vk + force
    rows, cols, vals = _segment_entries(all_segments, dP_next, dP_prev)
    families.append(_Family('power', force * vk, np.full(M - 1, -INFTY),
                            np.minimum(p.power_max_W, path.p_max[:-1]), rows, cols, vals))

    # Rombo de fricción con holgura compartida por grupo
    ax_lim, ay_lim = diamond_limits(dp)
    kappa = np.abs(path.kappa[:-1])
    ax_hat = force / (p.mass_kg * ax_lim)
    ay_hat = kappa * np.square(vk) / ay_lim
    dax_next = dF_next / (p.mass_kg * ax_lim)
    dax_prev = dF_prev / (p.mass_kg * ax_lim)
    day_prev = 2.0 * kappa * vk / ay_lim
    groups = dp.slack_groups()
    for name, (s1, s2) in DIAMOND_SIGNS.items():
        rows, cols, vals = _segment_entries(all_segments, s1 * dax_next, s1 * dax_prev + s2 * day_prev)
        rows = np.concatenate((rows, all_segments))
        cols = np.concatenate((cols, nv + groups))
        vals = np.concatenate((vals, np.full(M - 1, -dp.zeta)))
        g = s1 * ax_hat + s2 * ay_hat - dp.zeta * eps[groups]
        families.append(_Family(name, g, np.full(M - 1, -INFTY), np.ones(M - 1), rows, cols, vals))

    # Caja de holguras
    families.append(_Family('slack_box', dp.zeta * eps, np.zeros(dp.N), np.full(dp.N, s.eps_max_pct / 100.0),
                            np.arange(dp.N), nv + np.arange(dp.N), np.full(dp.N, dp.zeta)))
    return families


def evaluate_nonlinear(dp: DiscreteProblem, o: np.ndarray) -> Dict[str, np.ndarray]:
    """Valor no lineal g(o) de cada familia de restricciones."""
    return {family.name: family.g for family in _families(dp, o)}


def constraint_bounds(dp: DiscreteProblem) -> Dict[str, Tuple[np.ndarray, np.ndarray]]:
    return {family.name: (family.lower, family.upper) for family in _families(dp, dp.o_lin)}


def constraint_violations(dp: DiscreteProblem, o: np.ndarray) -> Dict[str, float]:
    """Máxima violación no lineal por familia (unidades físicas, holgura incluida en el rombo)."""
    violations = {}
    for family in _families(dp, o):
        over = np.where(family.upper < INFTY_THRESHOLD, family.g - family.upper, 0.0)
        under = np.where(family.lower > -INFTY_THRESHOLD, family.lower - family.g, 0.0)
        violations[family.name] = float(max(0.0, np.max(over, initial=0.0), np.max(under, initial=0.0)))
    return violations


def _delta_bound(bound: np.ndarray, g: np.ndarray) -> np.ndarray:
    return np.where(np.abs(bound) >= INFTY_THRESHOLD, bound, bound - g)


def linearize_constraints(dp: DiscreteProblem) -> LinearizedConstraints:
    """Jacobiana y cotas en forma delta alrededor de dp.o_lin, filas etiquetadas por familia."""
    families = _families(dp, dp.o_lin)
    rows, cols, vals, lower, upper, g = [], [], [], [], [], []
    row_index = {}
    offset = 0
    for family in families:
        count = family.g.size
        row_index[family.name] = (offset, offset + count)
        rows.append(family.rows + offset)
        cols.append(family.cols)
        vals.append(family.vals)
        lower.append(_delta_bound(family.lower, family.g))
        upper.append(_delta_bound(family.upper, family.g))
        g.append(family.g)
        offset += count

    A = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(offset, dp.K))
    return LinearizedConstraints(A=A, l=np.concatenate(lower), u=np.concatenate(upper),
                                 g=np.concatenate(g), row_index=row_index)


# --- ENSAMBLADO ---

class AssembledQp(BaseModel):
    """QP local en forma delta con su desglose de filas."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    qp: QpProblem
    row_index: Dict[str, Tuple[int, int]]
    row_scale: np.ndarray
    o_lin: np.ndarray
    nnz_A: int
    nnz_P: int
    hessian_condition: Optional[float] = None

    @property
    def nnz_total(self) -> int:
        return self.nnz_A + self.nnz_P

    def row_counts(self) -> Dict[str, int]:
        return {name: stop - start for name, (start, stop) in self.row_index.items()}

    def row_layout(self) -> Dict[str, Any]:
        """
        Metadatos del desglose de filas para el volcado. La aceleración inicial
        se guarda como una fila de dos lados (a_x_ini ± δ_a); con dos filas de
        una cara el QP tendría `m_split_initial_accel` filas.
        """
        counts = self.row_counts()
        initial = counts.get('initial_accel', 0)
        return {
            'row_counts': counts,
            'initial_accel_two_sided': initial > 0,
            'initial_accel_one_sided_rows': 2 * initial,
            'm_split_initial_accel': self.qp.m + initial,
        }


def _row_scale(dp: DiscreteProblem, row_index: Dict[str, Tuple[int, int]], m: int) -> np.ndarray:
    # Fuerza y potencia se normalizan con los límites del vehículo para que el
    # residuo ∞ del ADMM compare filas de magnitud parecida
    scale = np.ones(m)
    for name, factor in (('force_box', 1.0 / dp.params.force_max_N), ('power', 1.0 / dp.params.power_max_W)):
        start, stop = row_index[name]
        scale[start:stop] = factor
    return scale


def assemble(dp: DiscreteProblem, with_condition: bool = False) -> AssembledQp:
    """
    Objetivo + restricciones linealizadas en dp.o_lin. Las dimensiones dependen
    solo de (M, N, modo), nunca de los valores de los parámetros.
    """
    P, q_abs = build_objective(dp)
    lin = linearize_constraints(dp)
    o_lin = dp.o_lin

    scale = _row_scale(dp, lin.row_index, lin.l.size)
    # Escalado entrada a entrada: conserva los ceros explícitos del patrón
    A = lin.A.copy()
    A.data = A.data * scale[A.indices]
    l = np.where(np.abs(lin.l) >= INFTY_THRESHOLD, lin.l, lin.l * scale)
    u = np.where(np.abs(lin.u) >= INFTY_THRESHOLD, lin.u, lin.u * scale)

    qp = QpProblem(P=P, q=P @ o_lin + q_abs, A=A, l=l, u=u)
    return AssembledQp(
        qp=qp,
        row_index=lin.row_index,
        row_scale=scale,
        o_lin=o_lin,
        nnz_A=int(lin.A.nnz),
        nnz_P=int(sp.triu(P).nnz),
        hessian_condition=hessian_condition(P) if with_condition else None,
    )
