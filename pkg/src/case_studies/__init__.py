"""Parameterized case studies: synchronous generator and controlled rigid body."""

from src.case_studies.base import CaseResult, load_params
from src.case_studies.rigid_body import (
    RigidBodyParams,
    build_rigid_body,
    rigid_body_condition_matrix,
    run_rigid_body_case,
    single_axis_threshold,
)
from src.case_studies.sync_gen import (
    SyncGenParams,
    build_sync_gen,
    condition_discrepancies,
    run_sync_gen_case,
    sync_gen_condition_matrix,
)

__all__ = [
    "CaseResult",
    "RigidBodyParams",
    "SyncGenParams",
    "build_rigid_body",
    "build_sync_gen",
    "condition_discrepancies",
    "load_params",
    "rigid_body_condition_matrix",
    "run_rigid_body_case",
    "run_sync_gen_case",
    "single_axis_threshold",
    "sync_gen_condition_matrix",
]
