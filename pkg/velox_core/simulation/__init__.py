from .energy import apply_energy_strategy, energy_from_profile, strategy_lap_energy
from .state import PatchAudit, RaceReport, RaceSettings, ReplanPolicy, SimState, TraversedPiece

__all__ = [
    "apply_energy_strategy",
    "energy_from_profile",
    "strategy_lap_energy",
    "PatchAudit",
    "RaceReport",
    "RaceSettings",
    "ReplanPolicy",
    "SimState",
    "TraversedPiece",
]
