"""LQG / LTR / LQI autopilot design toolkit for a canard-controlled missile pitch channel."""

__version__ = "0.1.0"

from .errors import ControlError  # noqa: E402
from .plant import MissileParams, StateSpaceModel, TransferFunction, build_missile_model  # noqa: E402
from .riccati import GainSet, NoiseSpec, WeightSpec, solve_care  # noqa: E402

__all__ = [
    "__version__",
    "ControlError",
    "GainSet",
    "MissileParams",
    "NoiseSpec",
    "StateSpaceModel",
    "TransferFunction",
    "WeightSpec",
    "build_missile_model",
    "solve_care",
]
