"""
Excepciones de Velox.

Los resultados numéricos que no son errores (QP no resuelto a tiempo, SQP sin
converger) viajan como estados; aquí solo viven las condiciones que cortan el
flujo normal.
"""


class VeloxError(Exception):
    """Raíz de todos los errores del planificador."""


class ScenarioError(VeloxError):
    """Escenario, pista, mapa o fichero de estrategia ilegible o inválido."""


class TrackDataError(ScenarioError):
    """Un fichero de datos viola las invariantes de su tipo."""


class EnergyStrategyCoverageError(TrackDataError):
    """La serie P_max(s_glo) de la estrategia energética no cubre la vuelta."""


class HorizonExceedsTrackError(VeloxError):
    """El horizonte de planificación sobrepasa el final de una pista abierta."""


class HorizonOverlapError(VeloxError):
    """Un parche del mapa de límites solapa con el horizonte activo."""

    def __init__(self, patch_range, horizon):
        self.patch_range = patch_range
        self.horizon = horizon
        super().__init__(
            f"El parche {patch_range} solapa con el horizonte planificado {horizon}; se aplaza la actualización."
        )


class NonConvexProblemError(VeloxError):
    """La factorización KKT revela una matriz P que no es semidefinida positiva."""

    def __init__(self, positive_pivots: int, expected: int):
        self.positive_pivots = positive_pivots
        self.expected = expected
        super().__init__(
            f"P no es semidefinida positiva: {positive_pivots} pivotes positivos de {expected} esperados."
        )


class PlanInfeasibleError(VeloxError):
    """El manejo de fallos agotó sus reintentos sin un plan factible."""


class OracleInfeasibleStartError(VeloxError):
    """La velocidad inicial supera la envolvente del perfil hacia delante/atrás."""

    def __init__(self, v_ini: float, v_cap: float):
        self.v_ini = v_ini
        self.v_cap = v_cap
        super().__init__(f"Inicio infactible: v_ini={v_ini:.3f} m/s supera el máximo admisible {v_cap:.3f} m/s.")
