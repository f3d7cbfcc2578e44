"""Forced equilibria: points of the steady-state relation."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike

from src.config import current_settings
from src.models.errors import NonConvergenceError, SingularJacobianError
from src.models.ph_model import (
    EquilibriumPoint,
    Matrix,
    ModelLike,
    QuadraticAffinePH,
    Vector,
    as_vector,
)
from src.services.ph_service import coenergy, dynamics

logger = logging.getLogger(__name__)

_SINGULAR_CONDITION = 1e14


@dataclass(slots=True)
class MembershipResult:
    member: bool
    residual: float

    def __bool__(self) -> bool:
        return self.member


def steady_state_jacobian(model: ModelLike, x: Vector, u: Vector) -> Matrix:
    """Jacobian of g(x) = (J(x) - R(x)) grad H(x) + G u.

    Exact for quadratic-affine systems: F(x) Q + sum_i F_i (Q x) e_i^T.
    Forward differences otherwise.
    """

    if isinstance(model, QuadraticAffinePH):
        Qx = model.Q @ x
        return model.state_matrix(x) @ model.Q + np.einsum(
            "iab,b->ai", model.F_stack, Qx
        )

    step = current_settings().forward_fd_step
    base = dynamics(model, x, u)
    jacobian = np.empty((model.dim_state, model.dim_state))
    for j in range(model.dim_state):
        h = step * (1.0 + abs(x[j]))
        shifted = x.copy()
        shifted[j] += h
        jacobian[:, j] = (dynamics(model, shifted, u) - base) / h
    return jacobian


def find_equilibrium(
    model: ModelLike, u_bar: ArrayLike, x0: ArrayLike | None = None
) -> EquilibriumPoint:
    """Solve g(x) = 0 for fixed u_bar by damped Newton with backtracking on ||g||."""

    settings = current_settings()
    n = model.dim_state
    u_vec = as_vector(u_bar, model.dim_input, "u_bar")
    x = np.zeros(n) if x0 is None else as_vector(x0, n, "x0")
    if not bool(np.all(np.isfinite(x))):
        raise ValueError("x0 must be finite")

    residual = dynamics(model, x, u_vec)
    residual_norm = float(np.linalg.norm(residual))
    iterations = 0

    while residual_norm > settings.equilibrium_tol:
        if iterations >= settings.equilibrium_max_iter:
            raise NonConvergenceError(
                f"equilibrium solve did not converge in {iterations} iterations",
                residual=residual_norm,
                iterate=x,
            )
        iterations += 1
        jacobian = steady_state_jacobian(model, x, u_vec)
        if np.linalg.cond(jacobian) > _SINGULAR_CONDITION:
            raise SingularJacobianError(
                "singular Jacobian in equilibrium solve; retry with a perturbed x0",
                residual=residual_norm,
                iterate=x,
            )
        step = scipy.linalg.solve(jacobian, -residual)

        scale = 1.0
        for _ in range(settings.max_step_halvings + 1):
            candidate = x + scale * step
            candidate_residual = dynamics(model, candidate, u_vec)
            candidate_norm = float(np.linalg.norm(candidate_residual))
            if np.isfinite(candidate_norm) and candidate_norm < residual_norm:
                break
            scale *= 0.5
        else:
            raise NonConvergenceError(
                "equilibrium line search stalled; retry with a different x0",
                residual=residual_norm,
                iterate=x,
            )
        logger.debug(
            "equilibrium iteration %d: residual %.3e (step scale %.3g)",
            iterations,
            candidate_norm,
            scale,
        )
        x, residual, residual_norm = candidate, candidate_residual, candidate_norm

    s_bar = coenergy(model, x)
    logger.info(
        "Equilibrium found in %d iterations with residual %.3e",
        iterations,
        residual_norm,
    )
    return EquilibriumPoint(
        x_bar=x,
        u_bar=u_vec,
        y_bar=model.G.T @ s_bar,
        s_bar=s_bar,
        residual_norm=residual_norm,
        iterations=iterations,
    )


def is_in_steady_state_relation(
    model: ModelLike, x: ArrayLike, u: ArrayLike, tol: float | None = None
) -> MembershipResult:
    tolerance = current_settings().equilibrium_tol if tol is None else tol
    residual = float(np.linalg.norm(dynamics(model, x, u)))
    return MembershipResult(member=residual <= tolerance, residual=residual)


def equilibrium_from_state(
    model: ModelLike, x_bar: ArrayLike, u_bar: ArrayLike | None = None
) -> EquilibriumPoint:
    """Build an EquilibriumPoint from a known x_bar.

    Without ``u_bar`` the input is recovered by least squares from
    G u = -(J - R) grad H at x_bar; the residual records how well it fits.
    """

    x_vec = as_vector(x_bar, model.dim_state, "x_bar")
    drift = dynamics(model, x_vec, np.zeros(model.dim_input))
    if u_bar is None:
        u_vec, *_ = np.linalg.lstsq(model.G, -drift, rcond=None)
    else:
        u_vec = as_vector(u_bar, model.dim_input, "u_bar")
    s_bar = coenergy(model, x_vec)
    return EquilibriumPoint(
        x_bar=x_vec,
        u_bar=u_vec,
        y_bar=model.G.T @ s_bar,
        s_bar=s_bar,
        residual_norm=float(np.linalg.norm(drift + model.G @ u_vec)),
    )
