from .params import VehicleParams, resolve_accel_floor
from .physics import (
    applied_force,
    coast_speed_analytic,
    drag_force,
    lateral_accel,
    power,
    segment_time,
    terminal_speed,
    travel_time,
)

__all__ = [
    "VehicleParams",
    "resolve_accel_floor",
    "applied_force",
    "coast_speed_analytic",
    "drag_force",
    "lateral_accel",
    "power",
    "segment_time",
    "terminal_speed",
    "travel_time",
]
