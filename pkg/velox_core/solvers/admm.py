# FILE: velox_core/solvers/admm.py

import time
from typing import NamedTuple, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from ..errors import NonConvexProblemError
from ..utils.logger import logger
from .backend_manager import KktBackendManager, default_manager
from .base_backend import KktBackend
from .qp_types import INFTY_THRESHOLD, AdmmSettings, QpProblem, QpSolution, QpStatus

# --- CONSTANTES DEL ESCALADO Y DE RHO ---
MIN_SCALING = 1e-4
MAX_SCALING = 1e4
RHO_MIN = 1e-6
RHO_MAX = 1e6
RHO_EQ_SCALE = 1e3
RHO_TOL = 1e-4
DIV_EPS = 1e-10


class _ScaledData(NamedTuple):
    P: sp.csc_matrix
    q: np.ndarray
    A: sp.csc_matrix
    l: np.ndarray
    u: np.ndarray
    D: np.ndarray
    E: np.ndarray
    c: float


class _Residuals(NamedTuple):
    pri: float
    dua: float
    eps_pri: float
    eps_dua: float
    pri_norm: float
    dua_norm: float


def _diag(values: np.ndarray) -> sp.csc_matrix:
    if values.size == 0:
        return sp.csc_matrix((0, 0))
    return sp.diags(values, format='csc')


def _inf_norm(values: np.ndarray) -> float:
    return float(np.max(np.abs(values))) if values.size else 0.0


def _col_inf_norm(matrix: sp.csc_matrix) -> np.ndarray:
    if matrix.shape[0] == 0 or matrix.nnz == 0:
        return np.zeros(matrix.shape[1])
    return np.asarray(abs(matrix).max(axis=0).toarray()).ravel()


def _row_inf_norm(matrix: sp.csc_matrix) -> np.ndarray:
    if matrix.shape[1] == 0 or matrix.nnz == 0:
        return np.zeros(matrix.shape[0])
    return np.asarray(abs(matrix).max(axis=1).toarray()).ravel()


def _limit_scaling(values):
    values = np.asarray(values, dtype=float)
    values = np.where(values < MIN_SCALING, 1.0, values)
    return np.minimum(values, MAX_SCALING)


# --- DETECCIÓN DE INFACTIBILIDAD ---

def detect_infeasibility(delta_z: np.ndarray, delta_y: np.ndarray, problem: QpProblem,
                         eps_prim_inf: float = 1e-4,
                         eps_dual_inf: float = 1e-4) -> Optional[Tuple[QpStatus, np.ndarray]]:
    """
    Comprueba los certificados de divergencia de las diferencias entre iterados
    (sin escalar). Devuelve (estado, certificado normalizado) o None.

    Primal: Aᵀδy ≈ 0 y uᵀ[δy]₊ + lᵀ[δy]₋ < 0.
    Dual:   Pδz ≈ 0, qᵀδz < 0 y Aδz dentro del cono de recesión de [l, u].
    """
    upper_inf = problem.u >= INFTY_THRESHOLD
    lower_inf = problem.l <= -INFTY_THRESHOLD

    norm_dy = _inf_norm(delta_y)
    if problem.m > 0 and norm_dy > eps_prim_inf:
        v = delta_y / norm_dy
        # Una cota infinita solo admite multiplicadores del signo que no la usa
        v = np.where(upper_inf, np.minimum(v, 0.0), v)
        v = np.where(lower_inf, np.maximum(v, 0.0), v)
        lhs = (problem.u[~upper_inf] @ np.maximum(v[~upper_inf], 0.0)
               + problem.l[~lower_inf] @ np.minimum(v[~lower_inf], 0.0))
        if lhs < -eps_prim_inf and _inf_norm(problem.A.T @ v) < eps_prim_inf:
            return QpStatus.PRIMAL_INFEASIBLE, v

    norm_dz = _inf_norm(delta_z)
    if norm_dz > eps_dual_inf:
        w = delta_z / norm_dz
        if problem.q @ w < -eps_dual_inf and _inf_norm(problem.P @ w) < eps_dual_inf:
            Aw = problem.A @ w
            in_cone = (upper_inf | (Aw <= eps_dual_inf)) & (lower_inf | (Aw >= -eps_dual_inf))
            if np.all(in_cone):
                return QpStatus.DUAL_INFEASIBLE, w

    return None


class AdmmSolver:
    """
    Resolvedor QP por separación de operadores (ADMM) con sistema KKT
    cuasi-definido, equilibrado de Ruiz, arranque en caliente y certificados
    de infactibilidad primal/dual.

    La factorización KKT se calcula una vez por problema; solo se rehace si el
    ρ adaptativo cambia lo suficiente.
    """

    def __init__(self, settings: Optional[AdmmSettings] = None,
                 backend_manager: Optional[KktBackendManager] = None):
        self.settings = settings or AdmmSettings()
        self.backend_manager = backend_manager or default_manager()

    # --- FASE 1: ESCALADO ---
    def _scale(self, problem: QpProblem) -> _ScaledData:
        n, m = problem.n, problem.m
        P, q, A = problem.P.copy(), problem.q.copy(), problem.A.copy()
        D, E, c = np.ones(n), np.ones(m), 1.0

        for _ in range(self.settings.scaling_iter):
            norm_x = np.maximum(_col_inf_norm(P), _col_inf_norm(A))
            d_tmp = 1.0 / np.sqrt(_limit_scaling(norm_x))
            e_tmp = 1.0 / np.sqrt(_limit_scaling(_row_inf_norm(A)))

            P = _diag(d_tmp) @ P @ _diag(d_tmp)
            A = _diag(e_tmp) @ A @ _diag(d_tmp)
            q = d_tmp * q
            D, E = D * d_tmp, E * e_tmp

            # Escalado del coste
            cost_norm = max(float(np.mean(_col_inf_norm(P))) if n else 0.0, _inf_norm(q))
            c_tmp = 1.0 / float(_limit_scaling(cost_norm))
            P, q, c = P * c_tmp, q * c_tmp, c * c_tmp

        return _ScaledData(P=sp.csc_matrix(P), q=q, A=sp.csc_matrix(A),
                           l=E * problem.l, u=E * problem.u, D=D, E=E, c=c)

    # --- FASE 2: RHO POR FILA Y FACTORIZACIÓN ---
    @staticmethod
    def _rho_vector(problem: QpProblem, rho: float) -> np.ndarray:
        rho_vec = np.full(problem.m, rho)
        free = (problem.l <= -INFTY_THRESHOLD) & (problem.u >= INFTY_THRESHOLD)
        equality = (problem.u - problem.l) < RHO_TOL
        rho_vec[equality] = rho * RHO_EQ_SCALE
        rho_vec[free] = RHO_MIN
        return np.clip(rho_vec, RHO_MIN, RHO_MAX)

    def _factorize(self, data: _ScaledData, rho_vec: np.ndarray) -> KktBackend:
        n, m = data.q.size, rho_vec.size
        top_left = data.P + self.settings.sigma * sp.eye(n, format='csc')
        if m == 0:
            kkt = sp.csc_matrix(top_left)
        else:
            kkt = sp.bmat([[top_left, data.A.T], [data.A, -_diag(1.0 / rho_vec)]], format='csc')

        backend = self.backend_manager.get_backend(n + m, self.settings.kkt_backend, self.settings.dense_threshold)
        try:
            backend.update(kkt)
        except RuntimeError as e:
            # Sin pivotaje fuera de la diagonal solo aparece un pivote nulo si P + σI no es definida
            raise NonConvexProblemError(-1, n) from e

        inertia = backend.inertia()
        if inertia is not None:
            if inertia[0] != n:
                raise NonConvexProblemError(inertia[0], n)
        elif n > 0:
            eigenvalues = np.linalg.eigvalsh(top_left.toarray())
            if eigenvalues.min() <= 0:
                raise NonConvexProblemError(int(np.sum(eigenvalues > 0)), n)
        return backend

    # --- RESIDUOS SIN ESCALAR ---
    def _residuals(self, data: _ScaledData, x, z, y) -> _Residuals:
        Ax = data.A @ x
        Px = data.P @ x
        Aty = data.A.T @ y
        pri = _inf_norm((Ax - z) / data.E)
        pri_norm = max(_inf_norm(Ax / data.E), _inf_norm(z / data.E))
        dua = _inf_norm((Px + data.q + Aty) / data.D) / data.c
        dua_norm = max(_inf_norm(Px / data.D), _inf_norm(Aty / data.D), _inf_norm(data.q / data.D)) / data.c
        return _Residuals(pri=pri, dua=dua,
                          eps_pri=self.settings.eps_abs + self.settings.eps_rel * pri_norm,
                          eps_dua=self.settings.eps_abs + self.settings.eps_rel * dua_norm,
                          pri_norm=pri_norm, dua_norm=dua_norm)

    @staticmethod
    def _unscale(data: _ScaledData, x, y):
        return data.D * x, data.E * y / data.c

    def _rho_estimate(self, rho: float, res: _Residuals) -> float:
        pri_ratio = res.pri / (res.pri_norm + DIV_EPS)
        dua_ratio = res.dua / (res.dua_norm + DIV_EPS)
        return float(np.clip(rho * np.sqrt(pri_ratio / (dua_ratio + DIV_EPS)), RHO_MIN, RHO_MAX))

    def solve(self, problem: QpProblem,
              warm_start: Optional[Tuple[Optional[np.ndarray], Optional[np.ndarray]]] = None,
              trace_id: str = 'N/A') -> QpSolution:
        """
        Ejecuta el ADMM. `warm_start` = (z₀, y₀), cualquiera de los dos puede ser None.
        Lanza NonConvexProblemError si la factorización revela una P no semidefinida.
        """
        start_time = time.perf_counter()
        settings = self.settings
        n, m = problem.n, problem.m

        data = self._scale(problem)
        rho = settings.rho
        rho_vec = self._rho_vector(problem, rho)
        backend = self._factorize(data, rho_vec)

        # --- FASE 3: INICIALIZACIÓN (FRÍO O CALIENTE) ---
        x, z, y = np.zeros(n), np.zeros(m), np.zeros(m)
        if warm_start is not None:
            x0, y0 = warm_start
            if x0 is not None:
                x = np.asarray(x0, dtype=float) / data.D
                z = data.A @ x
            if y0 is not None:
                y = data.c * np.asarray(y0, dtype=float) / data.E

        status = QpStatus.MAX_ITER
        certificate = None
        res = None
        iteration = 0

        # --- FASE 4: ITERACIONES ADMM ---
        for iteration in range(1, settings.max_iter + 1):
            rhs = np.concatenate((settings.sigma * x - data.q, z - y / rho_vec))
            solution = backend.solve(rhs)
            x_tilde = solution[:n]
            z_tilde = z + (solution[n:] - y) / rho_vec

            x_new = settings.alpha * x_tilde + (1.0 - settings.alpha) * x
            z_relaxed = settings.alpha * z_tilde + (1.0 - settings.alpha) * z
            z_new = np.clip(z_relaxed + y / rho_vec, data.l, data.u)
            y_new = y + rho_vec * (z_relaxed - z_new)

            delta_x, delta_y = x_new - x, y_new - y
            x, z, y = x_new, z_new, y_new

            check = iteration % settings.check_termination == 0 or iteration == 1
            adapt = settings.adaptive_rho and m > 0 and iteration % settings.adaptive_rho_interval == 0
            if not (check or adapt or iteration == settings.max_iter):
                continue

            res = self._residuals(data, x, z, y)
            if res.pri <= res.eps_pri and res.dua <= res.eps_dua:
                status = QpStatus.SOLVED
                break

            delta_z_unscaled, delta_y_unscaled = self._unscale(data, delta_x, delta_y)
            verdict = detect_infeasibility(delta_z_unscaled, delta_y_unscaled, problem,
                                           settings.eps_prim_inf, settings.eps_dual_inf)
            if verdict is not None:
                status, certificate = verdict
                break

            if adapt:
                rho_new = self._rho_estimate(rho, res)
                if rho_new > settings.adaptive_rho_tolerance * rho or rho_new < rho / settings.adaptive_rho_tolerance:
                    rho = rho_new
                    rho_vec = self._rho_vector(problem, rho)
                    backend = self._factorize(data, rho_vec)

        pri = res.pri if res is not None else float('inf')
        dua = res.dua if res is not None else float('inf')

        polished = False
        if status == QpStatus.SOLVED and settings.polish and m > 0:
            polished_iterate = self._polish(data, x, z, y, pri, dua)
            if polished_iterate is not None:
                x, z, y, pri, dua = polished_iterate
                polished = True

        z_out, y_out = self._unscale(data, x, y)
        result = QpSolution(
            status=status,
            z=z_out,
            y=y_out,
            iterations=iteration,
            residual_primal=pri,
            residual_dual=dua,
            certificate=certificate,
            objective=problem.objective(z_out) if status in (QpStatus.SOLVED, QpStatus.MAX_ITER) else float('nan'),
            polished=polished,
            backend=backend.get_backend_name(),
            solve_time_s=time.perf_counter() - start_time,
        )
        if status != QpStatus.SOLVED:
            logger.debug(f"ADMM terminó con estado {status.value}.", extra={
                'trace_id': trace_id,
                'data': {'iterations': iteration, 'pri_res': pri, 'dua_res': dua, 'rho': rho, 'n': n, 'm': m}})
        return result

    # --- FASE 5: PULIDO ---
    def _polish(self, data: _ScaledData, x, z, y, pri, dua):
        """KKT reducido sobre el conjunto activo adivinado; se acepta solo si mejora los residuos."""
        settings = self.settings
        n = x.size
        ind_low = np.where(z - data.l < -y)[0]
        ind_upp = np.where(data.u - z < y)[0]
        A_red = sp.vstack([data.A[ind_low], data.A[ind_upp]], format='csc')
        n_act = A_red.shape[0]

        top_left = data.P + settings.polish_delta * sp.eye(n, format='csc')
        if n_act:
            kkt = sp.bmat([[top_left, A_red.T], [A_red, -settings.polish_delta * sp.eye(n_act, format='csc')]],
                          format='csc')
            exact = sp.bmat([[data.P, A_red.T], [A_red, None]], format='csc')
        else:
            kkt = sp.csc_matrix(top_left)
            exact = sp.csc_matrix(data.P)

        backend = self.backend_manager.get_backend(n + n_act, settings.kkt_backend, settings.dense_threshold)
        try:
            backend.update(kkt)
        except RuntimeError:
            return None

        rhs = np.concatenate((-data.q, data.l[ind_low], data.u[ind_upp]))
        sol = backend.solve(rhs)
        for _ in range(settings.polish_refine_iter):
            sol = sol + backend.solve(rhs - exact @ sol)

        x_pol = sol[:n]
        y_pol = np.zeros(z.size)
        y_pol[ind_low] = sol[n:n + ind_low.size]
        y_pol[ind_upp] = sol[n + ind_low.size:]
        z_pol = np.clip(data.A @ x_pol, data.l, data.u)

        res = self._residuals(data, x_pol, z_pol, y_pol)
        improved = ((res.pri < pri and res.dua < dua)
                    or (res.pri < pri and dua < 1e-10)
                    or (res.dua < dua and pri < 1e-10))
        if not improved:
            return None
        return x_pol, z_pol, y_pol, res.pri, res.dua


def solve_qp(problem: QpProblem,
             warm_start: Optional[Tuple[Optional[np.ndarray], Optional[np.ndarray]]] = None,
             settings: Optional[AdmmSettings] = None) -> QpSolution:
    """Atajo funcional: resolver un QP con una instancia nueva del ADMM."""
    return AdmmSolver(settings).solve(problem, warm_start)
