from .track_map import (
    AccelLimitMap,
    ConservativeLimits,
    LocalPath,
    MapPatch,
    TrackMap,
    conservative_interpolate,
    conservative_profile,
    horizon_overlaps,
    patch_influence,
    sample_local_path,
    update_limits,
)
from .loaders import (
    EnergyStrategy,
    load_accel_map_csv,
    load_energy_strategy_csv,
    load_map_patches_csv,
    load_track_csv,
    save_accel_map_csv,
    save_track_csv,
)

__all__ = [
    "AccelLimitMap",
    "ConservativeLimits",
    "LocalPath",
    "MapPatch",
    "TrackMap",
    "conservative_interpolate",
    "conservative_profile",
    "horizon_overlaps",
    "patch_influence",
    "sample_local_path",
    "update_limits",
    "EnergyStrategy",
    "load_accel_map_csv",
    "load_energy_strategy_csv",
    "load_map_patches_csv",
    "load_track_csv",
    "save_accel_map_csv",
    "save_track_csv",
]
