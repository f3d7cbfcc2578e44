"""Domain types for port-Hamiltonian analysis."""

from src.models.ph_model import (
    EquilibriumPoint,
    ModelLike,
    PHModel,
    QuadraticAffinePH,
    ValidationReport,
    as_ph_model,
)
from src.models.report import ConditionReport, StabilityBranch, Verdict
from src.models.trajectory import DissipationReport, Trajectory

__all__ = [
    "ConditionReport",
    "DissipationReport",
    "EquilibriumPoint",
    "ModelLike",
    "PHModel",
    "QuadraticAffinePH",
    "StabilityBranch",
    "Trajectory",
    "ValidationReport",
    "Verdict",
    "as_ph_model",
]
