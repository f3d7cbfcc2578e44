"""Sixth-order synchronous generator feeding a resistive load.

State x = (psi_d, psi_q, psi_f, psi_kd, psi_kq, p): stator and rotor flux
linkages plus rotor angular momentum. Co-energy s = Q x = (I_d, I_q, I_f,
I_kd, I_kq, omega). Inputs are the field voltage V_f and the mechanical torque.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike
from pydantic import Field, model_validator

from src.case_studies.base import CaseParams, CaseResult, assert_same_matrix
from src.models.ph_model import Matrix, QuadraticAffinePH, Vector, as_vector
from src.services.analyzer_service import build_B, check_affine, shortage_gamma
from src.services.equilibrium_service import find_equilibrium

logger = logging.getLogger(__name__)

STATE_LABELS = ("psi_d", "psi_q", "psi_f", "psi_kd", "psi_kq", "p")


class SyncGenParams(CaseParams):
    """Inductances (H), resistances (ohm), friction and inertia, and the constant inputs."""

    L_d: float = Field(gt=0)
    L_q: float = Field(gt=0)
    L_afd: float
    L_akd: float
    L_akq: float
    L_ffd: float = Field(gt=0)
    L_kkd: float = Field(gt=0)
    L_kkq: float = Field(gt=0)
    k: float = 1.0
    r: float = Field(gt=0)
    R_f: float = Field(gt=0)
    R_kd: float = Field(gt=0)
    R_kq: float = Field(gt=0)
    d: float = Field(gt=0)
    m: float = Field(gt=0)
    V_f: float = 0.0
    tau: float = 0.0

    @model_validator(mode="after")
    def _inductance_positive_definite(self) -> SyncGenParams:
        L = self.inductance_matrix
        min_eig = float(np.linalg.eigvalsh(L)[0])
        if min_eig <= 0.0:
            raise ValueError(
                f"inductance matrix must be positive definite (min eigenvalue {min_eig:.3e})"
            )
        return self

    @property
    def inductance_matrix(self) -> Matrix:
        k = self.k
        return np.array(
            [
                [self.L_d, 0.0, k * self.L_afd, k * self.L_akd, 0.0],
                [0.0, self.L_q, 0.0, 0.0, -k * self.L_akq],
                [k * self.L_afd, 0.0, self.L_ffd, self.L_akd, 0.0],
                [k * self.L_akd, 0.0, self.L_akd, self.L_kkd, 0.0],
                [0.0, -k * self.L_akq, 0.0, 0.0, self.L_kkq],
            ]
        )

    @property
    def damping(self) -> Vector:
        return np.array([self.r, self.r, self.R_f, self.R_kd, self.R_kq, self.d])

    @property
    def inputs(self) -> Vector:
        return np.array([self.V_f, self.tau])


def _input_matrix() -> Matrix:
    G = np.zeros((6, 2))
    G[2, 0] = 1.0
    G[5, 1] = 1.0
    return G


def _interconnection_generators() -> tuple[Matrix, ...]:
    """F_1..F_6 with J(x) = sum_i x_i F_i: only psi_d and psi_q couple to p."""

    generators = [np.zeros((6, 6)) for _ in range(6)]
    generators[0][1, 5] = 1.0
    generators[0][5, 1] = -1.0
    generators[1][0, 5] = -1.0
    generators[1][5, 0] = 1.0
    return tuple(generators)


def build_sync_gen(p: SyncGenParams) -> QuadraticAffinePH:
    Q = scipy.linalg.block_diag(np.linalg.inv(p.inductance_matrix), 1.0 / p.m)
    Q = 0.5 * (Q + Q.T)
    R = np.diag(p.damping)
    return QuadraticAffinePH(
        F0=-R,
        F_list=_interconnection_generators(),
        Q=Q,
        R0=R,
        G=_input_matrix(),
        name="sync-gen",
    )


def sync_gen_coenergy_rhs(p: SyncGenParams, s: ArrayLike, u: ArrayLike) -> Vector:
    """(calJ(s) - R) s + G u, i.e. Q^-1 s' written directly in currents and speed."""

    s_vec = as_vector(s, 6, "s")
    u_vec = as_vector(u, 2, "u")
    I_d, I_q, I_f, I_kd, I_kq, omega = s_vec
    k = p.k
    v_J = np.array(
        [
            -p.L_q * I_q + k * p.L_akq * I_kq,
            p.L_d * I_d + k * p.L_afd * I_f + k * p.L_akd * I_kd,
        ]
    )
    calJ = np.zeros((6, 6))
    calJ[0:2, 5] = v_J
    calJ[5, 0:2] = -v_J
    return (calJ - np.diag(p.damping)) @ s_vec + _input_matrix() @ u_vec


def sync_gen_condition_matrix(p: SyncGenParams, s_bar: ArrayLike) -> Matrix:
    """B + B^T - 2R at the co-energy equilibrium ``s_bar``."""

    model = build_sync_gen(p)
    x_bar = model.Q_inv @ as_vector(s_bar, 6, "s_bar")
    B = build_B(model, x_bar)
    return B + B.T - 2.0 * np.diag(p.damping)


def sync_gen_reference_matrix(p: SyncGenParams, s_bar: ArrayLike) -> Matrix:
    """Closed-form condition matrix in terms of the equilibrium currents and speed."""

    I_d, I_q, _, _, _, omega = as_vector(s_bar, 6, "s_bar")
    k = p.k
    S = np.diag(-2.0 * p.damping)
    upper = {
        (0, 1): omega * (p.L_d - p.L_q),
        (0, 4): k * omega * p.L_akq,
        (0, 5): -I_q * p.L_d,
        (1, 2): k * omega * p.L_afd,
        (1, 3): k * omega * p.L_akd,
        (1, 5): I_d * p.L_q,
        (2, 5): -k * I_q * p.L_afd,
        (3, 5): -k * I_q * p.L_akd,
        (4, 5): -k * I_d * p.L_akq,
    }
    for (row, col), value in upper.items():
        S[row, col] = S[col, row] = value
    return S


def literature_condition_matrix(p: SyncGenParams, s_bar: ArrayLike) -> Matrix:
    """Condition matrix in its commonly printed form.

    Differs from the derived matrix in entry (2,6), which carries L_d instead
    of L_q, and in the rotor entries of the last row, which drop the factor k.
    """

    I_d, I_q, _, _, _, _ = as_vector(s_bar, 6, "s_bar")
    S = sync_gen_reference_matrix(p, s_bar)
    printed = {
        (1, 5): I_d * p.L_d,
        (2, 5): -I_q * p.L_afd,
        (3, 5): -I_q * p.L_akd,
        (4, 5): -I_d * p.L_akq,
    }
    for (row, col), value in printed.items():
        S[row, col] = S[col, row] = value
    return S


@dataclass(slots=True)
class Discrepancy:
    """One upper-triangle entry (1-based) where the printed matrix differs."""

    row: int
    col: int
    derived: float
    literature: float

    def to_dict(self) -> dict[str, object]:
        return {
            "row": self.row,
            "col": self.col,
            "derived": self.derived,
            "literature": self.literature,
        }


def condition_discrepancies(
    p: SyncGenParams, s_bar: ArrayLike, rel_tol: float = 1e-10
) -> list[Discrepancy]:
    derived = sync_gen_condition_matrix(p, s_bar)
    printed = literature_condition_matrix(p, s_bar)
    scale = 1.0 + float(np.max(np.abs(derived)))
    found: list[Discrepancy] = []
    for row, col in zip(*np.triu_indices(6)):
        if abs(derived[row, col] - printed[row, col]) > rel_tol * scale:
            found.append(
                Discrepancy(
                    row=int(row) + 1,
                    col=int(col) + 1,
                    derived=float(derived[row, col]),
                    literature=float(printed[row, col]),
                )
            )
    for item in found:
        logger.warning(
            "Condition matrix entry (%d,%d) differs from the printed form: %.9g vs %.9g",
            item.row,
            item.col,
            item.derived,
            item.literature,
        )
    return found


def initial_guess(p: SyncGenParams) -> Vector:
    """State whose co-energy carries only the field current V_f/R_f and the speed tau/d."""

    model = build_sync_gen(p)
    s0 = np.array([0.0, 0.0, p.V_f / p.R_f, 0.0, 0.0, p.tau / p.d])
    return model.Q_inv @ s0


def run_sync_gen_case(p: SyncGenParams, x0: ArrayLike | None = None) -> CaseResult:
    model = build_sync_gen(p)
    eqpt = find_equilibrium(model, p.inputs, initial_guess(p) if x0 is None else x0)

    derived = sync_gen_condition_matrix(p, eqpt.s_bar)
    assert_same_matrix(derived, sync_gen_reference_matrix(p, eqpt.s_bar), "sync gen")
    discrepancies = condition_discrepancies(p, eqpt.s_bar)
    report = check_affine(model, eqpt.x_bar)
    shortage = shortage_gamma(model, eqpt.x_bar)
    logger.info(
        "Synchronous generator at omega_bar=%.9g: verdict=%s",
        eqpt.s_bar[5],
        report.verdict,
    )
    return CaseResult(
        case="sync-gen",
        model=model,
        equilibrium=eqpt,
        report=report,
        shortage=shortage,
        condition_matrix=derived,
        extras={
            "state_labels": list(STATE_LABELS),
            "literature_discrepancies": [item.to_dict() for item in discrepancies],
        },
    )
