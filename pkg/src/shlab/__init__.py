"""Numerical laboratory for heat equations with a double-singular inverse-square potential."""
from ._kernels import BACKEND
from .domain import (
    BallRadius,
    DirectionTable,
    DomainSpec,
    PotentialSpec,
    eval_phi,
    eval_potential,
    hardy_constant,
    inf_potential,
)
from .discretize import RadialGrid, assemble, build_grid, h1_norm_annulus

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BallRadius",
    "DirectionTable",
    "DomainSpec",
    "PotentialSpec",
    "RadialGrid",
    "assemble",
    "build_grid",
    "eval_phi",
    "eval_potential",
    "h1_norm_annulus",
    "hardy_constant",
    "inf_potential",
]
