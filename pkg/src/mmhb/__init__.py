"""Heavy-ball momentum in min-max games: discrete algorithms, continuous
models, spectral predictions, and slope metrics."""

from .discrete import ALT, SIM, AdamParams, HBParams, Trajectory, run, run_adam
from .games import (
    Bilinear,
    GameModel,
    QuadraticGame,
    make_builtin,
    random_quadratic,
    random_quadratic_normalized,
)

__all__ = [
    "ALT",
    "SIM",
    "AdamParams",
    "HBParams",
    "Trajectory",
    "run",
    "run_adam",
    "Bilinear",
    "GameModel",
    "QuadraticGame",
    "make_builtin",
    "random_quadratic",
    "random_quadratic_normalized",
]
