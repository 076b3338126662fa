"""Lagrangian gas dynamics: conservative and invariant difference schemes, audits and symmetry checks."""
from .core import (BoundaryCondition, DomainError, EntropyProfile, GasModel, Layer, MassMesh,
                   PrescribedPressure, RigidWall, ShapeError)
from .schemes import EXPLICIT_GAMMA3, POPOV_SAMARSKII, StepConfig, StepFailure, Trajectory, run

__all__ = [
    "BoundaryCondition", "DomainError", "EntropyProfile", "GasModel", "Layer", "MassMesh",
    "PrescribedPressure", "RigidWall", "ShapeError", "EXPLICIT_GAMMA3", "POPOV_SAMARSKII",
    "StepConfig", "StepFailure", "Trajectory", "run",
]
__version__ = "0.1.0"
