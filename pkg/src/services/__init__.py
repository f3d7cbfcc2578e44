"""Domain services."""

from src.services.analyzer_service import (
    check_affine,
    check_general,
    least_shortage,
    monotonicity_holds,
    monotonicity_probe,
    shortage_gamma,
    stability_margin,
)
from src.services.equilibrium_service import equilibrium_from_state, find_equilibrium
from src.services.ph_service import dynamics, validate
from src.services.simulation_service import closed_loop, integrate, verify_dissipation

__all__ = [
    "check_affine",
    "check_general",
    "closed_loop",
    "dynamics",
    "equilibrium_from_state",
    "find_equilibrium",
    "integrate",
    "least_shortage",
    "monotonicity_holds",
    "monotonicity_probe",
    "shortage_gamma",
    "stability_margin",
    "validate",
    "verify_dissipation",
]
