from .forward_backward import (
    LimitingFactor,
    OracleComparison,
    OracleProfile,
    compare_profiles,
    forward_backward,
)

__all__ = [
    "LimitingFactor",
    "OracleComparison",
    "OracleProfile",
    "compare_profiles",
    "forward_backward",
]
