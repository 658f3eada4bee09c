# FILE: velox_core/solvers/qp_types.py

import json
from enum import Enum
from typing import Any, Dict, Literal, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Centinela para ±∞ en las cotas (convención habitual en QP embebido)
INFTY = 1e30
INFTY_THRESHOLD = INFTY * 1e-6


class QpStatus(str, Enum):
    SOLVED = "Solved"
    MAX_ITER = "MaxIter"
    PRIMAL_INFEASIBLE = "PrimalInfeasible"
    DUAL_INFEASIBLE = "DualInfeasible"


class AdmmSettings(BaseModel):
    """Configuración del resolvedor ADMM."""
    model_config = ConfigDict(frozen=True)

    eps_abs: float = Field(1e-2, gt=0, description="Tolerancia absoluta de los residuos (ε_QP,tol).")
    eps_rel: float = Field(1e-2, ge=0, description="Tolerancia relativa de los residuos.")
    eps_prim_inf: float = Field(1e-4, gt=0, description="Tolerancia del certificado de infactibilidad primal.")
    eps_dual_inf: float = Field(1e-4, gt=0, description="Tolerancia del certificado de infactibilidad dual.")
    max_iter: int = Field(4000, gt=0, description="Iteraciones ADMM máximas.")
    rho: float = Field(0.1, gt=0, description="Paso de las restricciones ρ.")
    sigma: float = Field(1e-6, gt=0, description="Regularización primal σ.")
    alpha: float = Field(1.6, gt=0, lt=2, description="Parámetro de sobre-relajación.")
    adaptive_rho: bool = Field(True, description="Reajustar ρ según el cociente de residuos (refactoriza el KKT).")
    adaptive_rho_interval: int = Field(25, gt=0, description="Iteraciones entre reajustes de ρ.")
    adaptive_rho_tolerance: float = Field(5.0, gt=1, description="Cambio relativo mínimo de ρ para refactorizar.")
    check_termination: int = Field(5, gt=0, description="Cada cuántas iteraciones se evalúan residuos y certificados.")
    scaling_iter: int = Field(10, ge=0, description="Iteraciones de equilibrado de Ruiz.")
    polish: bool = Field(False, description="Pulir la solución resolviendo el KKT reducido del conjunto activo.")
    polish_refine_iter: int = Field(3, ge=0, description="Pasos de refinamiento iterativo del pulido.")
    polish_delta: float = Field(1e-6, gt=0, description="Regularización del KKT reducido.")
    kkt_backend: Literal["auto", "sparse_lu", "dense_lu"] = Field("auto", description="Factorización del sistema KKT.")
    dense_threshold: int = Field(512, ge=0, description="Con n+m por debajo de este valor se usa la factorización densa.")

    @classmethod
    def with_tolerance(cls, eps_tol: float, **kwargs) -> "AdmmSettings":
        return cls(eps_abs=eps_tol, eps_rel=eps_tol, **kwargs)


def _to_csc(value) -> sp.csc_matrix:
    if sp.issparse(value):
        return sp.csc_matrix(value, dtype=float)
    return sp.csc_matrix(np.atleast_2d(np.asarray(value, dtype=float)))


def _to_bounds(value) -> np.ndarray:
    return np.clip(np.array(value, dtype=float).ravel(), -INFTY, INFTY)


class QpProblem(BaseModel):
    """QP convexo en forma estándar: min ½zᵀPz + qᵀz  s.a.  l ≤ Az ≤ u."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    P: sp.csc_matrix
    q: np.ndarray
    A: sp.csc_matrix
    l: np.ndarray
    u: np.ndarray

    @field_validator('P', 'A', mode='before')
    @classmethod
    def _matrix(cls, value):
        return _to_csc(value)

    @field_validator('q', mode='before')
    @classmethod
    def _vector(cls, value):
        return np.array(value, dtype=float).ravel()

    @field_validator('l', 'u', mode='before')
    @classmethod
    def _bounds(cls, value):
        return _to_bounds(value)

    @model_validator(mode='after')
    def _check_dimensions(self):
        n = self.q.size
        if self.P.shape != (n, n):
            raise ValueError(f"P debe ser {n}x{n}; recibido {self.P.shape}.")
        m = self.l.size
        if self.A.shape != (m, n) or self.u.size != m:
            raise ValueError(f"A debe ser {m}x{n} y l, u de longitud {m}.")
        if np.any(self.l > self.u):
            raise ValueError("Se requiere l ≤ u elemento a elemento.")
        if n > 0 and self.P.nnz > 0:
            asym = abs(self.P - self.P.T).max()
            if asym > 1e-12 * max(1.0, abs(self.P).max()):
                raise ValueError(f"P no es simétrica (asimetría {asym:.3e}).")
        return self

    @property
    def n(self) -> int:
        return int(self.q.size)

    @property
    def m(self) -> int:
        return int(self.l.size)

    def objective(self, z: np.ndarray) -> float:
        return float(0.5 * z @ (self.P @ z) + self.q @ z)


class QpSolution(BaseModel):
    """Resultado primal/dual del ADMM o certificado de infactibilidad."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    status: QpStatus
    z: np.ndarray
    y: np.ndarray
    iterations: int
    residual_primal: float
    residual_dual: float
    certificate: Optional[np.ndarray] = None
    objective: float = float('nan')
    polished: bool = False
    backend: str = ""
    solve_time_s: float = 0.0


# --- VOLCADO DE DEPURACIÓN ---

def _triplets(matrix: sp.spmatrix):
    coo = sp.coo_matrix(matrix)
    order = np.lexsort((coo.col, coo.row))
    return [[int(coo.row[k]), int(coo.col[k]), float(coo.data[k])] for k in order]


def problem_to_dict(problem: QpProblem, row_index: Optional[Dict[str, Tuple[int, int]]] = None,
                    metadata: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Documento JSON con P (triángulo superior) y A en tripletas para reproducir el QP fuera de línea."""
    document = {
        'P_triplets': _triplets(sp.triu(problem.P)),
        'q': problem.q.tolist(),
        'A_triplets': _triplets(problem.A),
        'l': problem.l.tolist(),
        'u': problem.u.tolist(),
        'n': problem.n,
        'm': problem.m,
    }
    if row_index is not None:
        document['row_index'] = {name: [int(a), int(b)] for name, (a, b) in row_index.items()}
    if metadata is not None:
        document['metadata'] = metadata
    return document


def dump_problem(problem: QpProblem, path: str, row_index: Optional[Dict[str, Tuple[int, int]]] = None,
                 metadata: Optional[Dict[str, Any]] = None):
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(problem_to_dict(problem, row_index, metadata), f, indent=1)


def _from_triplets(triplets, shape) -> sp.csc_matrix:
    if not triplets:
        return sp.csc_matrix(shape)
    rows, cols, vals = zip(*triplets)
    return sp.csc_matrix((vals, (rows, cols)), shape=shape)


def load_problem_dump(path: str) -> Tuple[QpProblem, Dict[str, Tuple[int, int]]]:
    with open(path, 'r', encoding='utf-8') as f:
        document = json.load(f)
    n, m = int(document['n']), int(document['m'])
    upper = _from_triplets(document['P_triplets'], (n, n))
    P = upper + sp.triu(upper, k=1).T
    problem = QpProblem(P=P, q=document['q'], A=_from_triplets(document['A_triplets'], (m, n)),
                        l=document['l'], u=document['u'])
    row_index = {name: (a, b) for name, (a, b) in document.get('row_index', {}).items()}
    return problem, row_index
