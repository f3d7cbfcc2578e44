"""Controlled rigid body: angular momentum dynamics under u = -R omega + d."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike
from pydantic import Field, model_validator

from src.case_studies.base import CaseParams, CaseResult, assert_same_matrix
from src.models.errors import PreconditionError
from src.models.ph_model import EquilibriumPoint, Matrix, QuadraticAffinePH, Vector, as_vector
from src.services.analyzer_service import build_B, check_affine, shortage_gamma
from src.services.equilibrium_service import equilibrium_from_state, find_equilibrium

logger = logging.getLogger(__name__)

# p = sum_i p_i E_i with E_i the cross-product generator, so J(p) w = p x w.
_CROSS_GENERATORS = (
    np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]]),
    np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]),
    np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]),
)


class RigidBodyParams(CaseParams):
    """Principal inertias, proportional gains and constant disturbance torques.

    Gains may be zero (uncontrolled body). ``omega_bar`` pins the equilibrium
    directly; the matching input is then recovered and ``d`` must stay zero.
    """

    m_x: float = Field(gt=0)
    m_y: float = Field(gt=0)
    m_z: float = Field(gt=0)
    r_x: float = Field(default=1.0, ge=0)
    r_y: float = Field(default=1.0, ge=0)
    r_z: float = Field(default=1.0, ge=0)
    d_x: float = 0.0
    d_y: float = 0.0
    d_z: float = 0.0
    omega_bar: tuple[float, float, float] | None = None

    @model_validator(mode="after")
    def _omega_bar_excludes_disturbance(self) -> RigidBodyParams:
        if self.omega_bar is not None and any(self.disturbance):
            raise ValueError("give either omega_bar or the disturbance d, not both")
        return self

    @property
    def inertia(self) -> Vector:
        return np.array([self.m_x, self.m_y, self.m_z])

    @property
    def gains(self) -> Vector:
        return np.array([self.r_x, self.r_y, self.r_z])

    @property
    def disturbance(self) -> Vector:
        return np.array([self.d_x, self.d_y, self.d_z])


def build_rigid_body(p: RigidBodyParams) -> QuadraticAffinePH:
    """p' = (J(p) - R) M^-1 p + d with the disturbance on the input port, y = omega."""

    return QuadraticAffinePH(
        F0=-np.diag(p.gains),
        F_list=_CROSS_GENERATORS,
        Q=np.diag(1.0 / p.inertia),
        R0=np.diag(p.gains),
        G=np.eye(3),
        name="rigid-body",
    )


def momentum_of(p: RigidBodyParams, omega: ArrayLike) -> Vector:
    return p.inertia * as_vector(omega, 3, "omega")


def rigid_body_condition_matrix(p: RigidBodyParams, omega_bar: ArrayLike) -> Matrix:
    """B + B^T - 2R at the equilibrium angular velocity ``omega_bar``."""

    B = build_B(build_rigid_body(p), momentum_of(p, omega_bar))
    return B + B.T - 2.0 * np.diag(p.gains)


def rigid_body_reference_matrix(p: RigidBodyParams, omega_bar: ArrayLike) -> Matrix:
    """Closed-form condition matrix, written entry by entry."""

    wx, wy, wz = as_vector(omega_bar, 3, "omega_bar")
    return np.array(
        [
            [-2.0 * p.r_x, wz * (p.m_y - p.m_x), wy * (p.m_x - p.m_z)],
            [wz * (p.m_y - p.m_x), -2.0 * p.r_y, wx * (p.m_z - p.m_y)],
            [wy * (p.m_x - p.m_z), wx * (p.m_z - p.m_y), -2.0 * p.r_z],
        ]
    )


@dataclass(slots=True)
class ThresholdResult:
    lhs: float
    rhs: float
    stable: bool

    def to_dict(self) -> dict[str, object]:
        return {"lhs": self.lhs, "rhs": self.rhs, "stable": self.stable}


def single_axis_threshold(p: RigidBodyParams) -> ThresholdResult:
    """Strict-condition test r_x^2 r_y r_z > (d_x (m_z - m_y) / 2)^2 for a disturbance on x only."""

    if p.d_y != 0.0 or p.d_z != 0.0:
        raise PreconditionError("single-axis threshold needs d_y = d_z = 0")
    if not bool(np.all(p.gains > 0)):
        raise PreconditionError("single-axis threshold needs positive gains")
    lhs = p.r_x**2 * p.r_y * p.r_z
    rhs = (p.d_x * (p.m_z - p.m_y) / 2.0) ** 2
    return ThresholdResult(lhs=lhs, rhs=rhs, stable=lhs > rhs)


def rigid_body_equilibrium(p: RigidBodyParams) -> EquilibriumPoint:
    model = build_rigid_body(p)
    if p.omega_bar is not None:
        return equilibrium_from_state(model, momentum_of(p, p.omega_bar))

    gains = p.gains
    omega_guess = np.divide(
        p.disturbance, gains, out=np.zeros(3), where=gains > 0
    )
    return find_equilibrium(model, p.disturbance, momentum_of(p, omega_guess))


def run_rigid_body_case(p: RigidBodyParams) -> CaseResult:
    model = build_rigid_body(p)
    eqpt = rigid_body_equilibrium(p)
    omega_bar = eqpt.s_bar

    derived = rigid_body_condition_matrix(p, omega_bar)
    assert_same_matrix(derived, rigid_body_reference_matrix(p, omega_bar), "rigid body")
    report = check_affine(model, eqpt.x_bar)
    shortage = shortage_gamma(model, eqpt.x_bar)

    extras: dict[str, object] = {}
    single_axis = p.omega_bar is None and p.d_y == 0.0 and p.d_z == 0.0
    if single_axis and bool(np.all(p.gains > 0)):
        extras["single_axis_threshold"] = single_axis_threshold(p).to_dict()
    logger.info(
        "Rigid body at omega_bar=%s: verdict=%s",
        np.round(omega_bar, 9).tolist(),
        report.verdict,
    )
    return CaseResult(
        case="rigid-body",
        model=model,
        equilibrium=eqpt,
        report=report,
        shortage=shortage,
        condition_matrix=derived,
        extras=extras,
    )
