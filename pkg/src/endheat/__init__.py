"""Heat kernels and Poincare constants on manifolds with ends, via radial star-graph models."""

from .volume_models import (
    EndSpec,
    EuclideanPlaneProfile,
    ManifoldSpec,
    OscillatingProfile,
    OscillationSchedule,
    ParabolicWeightProfile,
    PowerLogProfile,
    ScheduleMode,
    build_schedule,
    classify_end,
    compute_h,
)
from .mesh_solver import BC, StarMesh, build_mesh, heat_solve

__all__ = [
    "BC",
    "EndSpec",
    "EuclideanPlaneProfile",
    "ManifoldSpec",
    "OscillatingProfile",
    "OscillationSchedule",
    "ParabolicWeightProfile",
    "PowerLogProfile",
    "ScheduleMode",
    "StarMesh",
    "build_mesh",
    "build_schedule",
    "classify_end",
    "compute_h",
    "heat_solve",
]
