from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .base_backend import KktBackend


class SparseLuBackend(KktBackend):
    """
    SuperLU en modo simétrico sin pivotaje fuera de la diagonal: con la misma
    permutación en filas y columnas la diagonal de U da la inercia del KKT.
    """

    def __init__(self):
        self.factor = None

    def get_backend_name(self) -> str:
        return "sparse_lu"

    def update(self, kkt: sp.spmatrix) -> None:
        self.factor = spla.splu(
            sp.csc_matrix(kkt),
            permc_spec='MMD_AT_PLUS_A',
            diag_pivot_thresh=0.0,
            options={'SymmetricMode': True},
        )

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self.factor.solve(rhs)

    def inertia(self) -> Optional[Tuple[int, int]]:
        if self.factor is None or not np.array_equal(self.factor.perm_r, self.factor.perm_c):
            return None
        pivots = self.factor.U.diagonal()
        return int(np.sum(pivots > 0)), int(np.sum(pivots < 0))
