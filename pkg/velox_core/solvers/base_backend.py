from abc import ABC, abstractmethod
from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sp


class KktBackend(ABC):
    """
    Contrato para las factorizaciones directas del sistema KKT cuasi-definido.

    Cada instancia guarda su propia factorización: un resolvedor ADMM crea la
    suya por problema y la reutiliza en todas las iteraciones, de modo que
    instancias distintas pueden trabajar en paralelo sin estado compartido.
    """

    @abstractmethod
    def get_backend_name(self) -> str:
        """Nombre con el que el gestor registra el backend (ej. 'sparse_lu')."""
        pass

    @abstractmethod
    def update(self, kkt: sp.spmatrix) -> None:
        """Factoriza (o refactoriza) la matriz KKT."""
        pass

    @abstractmethod
    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Resuelve el sistema con la última factorización."""
        pass

    @abstractmethod
    def inertia(self) -> Optional[Tuple[int, int]]:
        """
        Número de pivotes (positivos, negativos) de la última factorización, o
        None si la factorización no permite leerlos.
        """
        pass
