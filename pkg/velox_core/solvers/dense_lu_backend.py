from typing import Optional, Tuple

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .base_backend import KktBackend


class DenseLuBackend(KktBackend):
    """Respaldo denso para sistemas pequeños; la inercia sale de la factorización LDLᵀ (ley de Sylvester)."""

    def __init__(self):
        self.lu = None
        self._inertia = None

    def get_backend_name(self) -> str:
        return "dense_lu"

    def update(self, kkt: sp.spmatrix) -> None:
        dense = kkt.toarray() if sp.issparse(kkt) else np.asarray(kkt, dtype=float)
        self.lu = la.lu_factor(dense, check_finite=False)
        _, d, _ = la.ldl(dense, lower=True, check_finite=False)
        block_eigs = np.linalg.eigvalsh(d)
        self._inertia = (int(np.sum(block_eigs > 0)), int(np.sum(block_eigs < 0)))

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return la.lu_solve(self.lu, rhs, check_finite=False)

    def inertia(self) -> Optional[Tuple[int, int]]:
        return self._inertia
