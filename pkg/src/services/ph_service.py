"""Energy, co-energy and flow maps of port-Hamiltonian models."""

from __future__ import annotations

import logging
from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike

from src.config import current_settings
from src.models.errors import NonConvergenceError
from src.models.ph_model import (
    EquilibriumPoint,
    Matrix,
    ModelLike,
    PHModel,
    QuadraticAffinePH,
    StateCheck,
    ValidationReport,
    Vector,
    as_matrix,
    as_ph_model,
    as_vector,
    psd_tolerance,
    skew_tolerance,
)

logger = logging.getLogger(__name__)


def validate(model: ModelLike, sample_states: Iterable[ArrayLike]) -> ValidationReport:
    """Check skew-symmetry of J, R >= R_star and Hessian symmetry at each sample."""

    ph = as_ph_model(model)
    n = ph.dim_state
    report = ValidationReport()
    for raw_state in sample_states:
        x = as_vector(raw_state, n, "sample_state")
        J = as_matrix(ph.J(x), (n, n), "J")
        R = as_matrix(ph.R(x), (n, n), "R")
        hess = as_matrix(ph.hess_H(x), (n, n), "hess_H")
        _ = as_vector(ph.grad_H(x), n, "grad_H")

        skew_defect = float(np.linalg.norm(J + J.T))
        skew_tol = skew_tolerance(J)
        gap = R - ph.R_star
        gap_min = float(np.linalg.eigvalsh(0.5 * (gap + gap.T))[0])
        psd_tol = psd_tolerance(R)
        hess_defect = float(np.linalg.norm(hess - hess.T))
        hess_min = float(np.linalg.eigvalsh(0.5 * (hess + hess.T))[0])

        passed = (
            skew_defect <= skew_tol
            and gap_min >= -psd_tol
            and hess_defect <= psd_tolerance(hess)
            and (not ph.strictly_convex or hess_min > 0.0)
        )
        report.checks.append(
            StateCheck(
                state=x,
                skew_defect=skew_defect,
                skew_tol=skew_tol,
                dissipation_gap_min_eig=gap_min,
                psd_tol=psd_tol,
                hessian_symmetry_defect=hess_defect,
                hessian_min_eig=hess_min,
                passed=passed,
            )
        )

    if not report.checks:
        raise ValueError("sample_states must be nonempty")
    if not report.passed:
        logger.warning(
            "Model %s failed structural checks at %d of %d states",
            ph.name,
            report.failed_count,
            len(report.checks),
        )
    return report


def dynamics(model: ModelLike, x: ArrayLike, u: ArrayLike) -> Vector:
    """Return (J(x) - R(x)) grad H(x) + G u."""

    n, m = model.dim_state, model.dim_input
    x_vec = as_vector(x, n, "x")
    u_vec = as_vector(u, m, "u")
    if isinstance(model, QuadraticAffinePH):
        return model.state_matrix(x_vec) @ (model.Q @ x_vec) + model.G @ u_vec
    return model.F(x_vec) @ model.grad_H(x_vec) + model.G @ u_vec


def output(model: ModelLike, x: ArrayLike) -> Vector:
    x_vec = as_vector(x, model.dim_state, "x")
    return model.G.T @ coenergy(model, x_vec)


def coenergy(model: ModelLike, x: ArrayLike) -> Vector:
    x_vec = as_vector(x, model.dim_state, "x")
    if isinstance(model, QuadraticAffinePH):
        return model.Q @ x_vec
    return as_vector(model.grad_H(x_vec), model.dim_state, "grad_H")


def state_from_coenergy(
    model: ModelLike, s: ArrayLike, x_guess: ArrayLike | None = None
) -> Vector:
    """Invert the co-energy map: return x with grad H(x) = s.

    Uses the closed form when available, otherwise damped Newton from
    ``x_guess`` (zero when omitted).
    """

    s_vec = as_vector(s, model.dim_state, "s")
    if isinstance(model, QuadraticAffinePH):
        return model.Q_inv @ s_vec
    if model.grad_H_star is not None:
        return as_vector(model.grad_H_star(s_vec), model.dim_state, "grad_H_star")

    x0 = (
        np.zeros(model.dim_state)
        if x_guess is None
        else as_vector(x_guess, model.dim_state, "x_guess")
    )
    return _invert_gradient(model, s_vec, x0)


def _invert_gradient(model: PHModel, s: Vector, x0: Vector) -> Vector:
    settings = current_settings()
    tol = settings.newton_tol * (1.0 + float(np.linalg.norm(s)))
    x = x0.copy()
    residual = model.grad_H(x) - s
    residual_norm = float(np.linalg.norm(residual))

    for iteration in range(settings.newton_max_iter):
        if residual_norm <= tol:
            logger.debug("grad H inversion converged in %d iterations", iteration)
            return x
        try:
            step = scipy.linalg.solve(model.hess_H(x), -residual)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NonConvergenceError(
                f"Hessian not invertible during grad H inversion: {exc}",
                residual=residual_norm,
                iterate=x,
            ) from exc

        scale = 1.0
        for _ in range(settings.max_step_halvings + 1):
            candidate = x + scale * step
            candidate_residual = model.grad_H(candidate) - s
            candidate_norm = float(np.linalg.norm(candidate_residual))
            if np.isfinite(candidate_norm) and candidate_norm < residual_norm:
                break
            scale *= 0.5
        else:
            raise NonConvergenceError(
                "grad H inversion stalled; s may lie outside the range of grad H",
                residual=residual_norm,
                iterate=x,
            )
        x, residual, residual_norm = candidate, candidate_residual, candidate_norm

    if residual_norm <= tol:
        return x
    raise NonConvergenceError(
        f"grad H inversion did not converge in {settings.newton_max_iter} iterations",
        residual=residual_norm,
        iterate=x,
    )


def shifted_hamiltonian(model: ModelLike, x: ArrayLike, x_bar: ArrayLike) -> float:
    """Bregman distance H(x) - (x - x_bar)^T grad H(x_bar) - H(x_bar)."""

    n = model.dim_state
    x_vec = as_vector(x, n, "x")
    x_bar_vec = as_vector(x_bar, n, "x_bar")
    delta = x_vec - x_bar_vec
    if isinstance(model, QuadraticAffinePH):
        return 0.5 * float(delta @ model.Q @ delta)
    return float(
        model.H(x_vec)
        - delta @ model.grad_H(x_bar_vec)
        - model.H(x_bar_vec)
    )


def calF(model: ModelLike, s: ArrayLike, x_guess: ArrayLike | None = None) -> Matrix:
    """F = J - R restated in co-energy variables: calF(s) = F(grad H*(s))."""

    s_vec = as_vector(s, model.dim_state, "s")
    if isinstance(model, QuadraticAffinePH):
        return model.F0 + np.einsum("i,iab->ab", s_vec, model.coenergy_coefficients)
    return model.F(state_from_coenergy(model, s_vec, x_guess))


@dataclass(slots=True)
class DissipationBreakdown:
    """Time derivative of the shifted Hamiltonian and its decomposition.

    rate == monotone_term - excess_damping + supply, up to the equilibrium residual.
    """

    rate: float
    monotone_term: float
    excess_damping: float
    supply: float


def dissipation_rate(
    model: ModelLike, x: ArrayLike, u: ArrayLike, eqpt: EquilibriumPoint
) -> DissipationBreakdown:
    ph = as_ph_model(model)
    x_vec = as_vector(x, ph.dim_state, "x")
    u_vec = as_vector(u, ph.dim_input, "u")
    s = coenergy(model, x_vec)
    ds = s - eqpt.s_bar

    rate = float(ds @ dynamics(model, x_vec, u_vec))
    F_x = ph.F(x_vec)
    F_bar = ph.F(eqpt.x_bar)
    monotone_map = F_x @ eqpt.s_bar - ph.R_star @ s
    monotone_map_bar = F_bar @ eqpt.s_bar - ph.R_star @ eqpt.s_bar
    R_x = ph.R(x_vec)
    gap = 0.5 * (R_x + R_x.T) - ph.R_star

    return DissipationBreakdown(
        rate=rate,
        monotone_term=float(ds @ (monotone_map - monotone_map_bar)),
        excess_damping=float(ds @ gap @ ds),
        supply=float((ph.G.T @ ds) @ (u_vec - eqpt.u_bar)),
    )
