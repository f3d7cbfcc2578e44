"""Port-Hamiltonian model types."""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field
from functools import cached_property
from typing import TypeAlias

import numpy as np
from numpy.typing import ArrayLike, NDArray

from src.config import current_settings
from src.models.errors import ModelStructureError

Vector: TypeAlias = NDArray[np.float64]
Matrix: TypeAlias = NDArray[np.float64]
MatrixMap: TypeAlias = Callable[[Vector], Matrix]
VectorMap: TypeAlias = Callable[[Vector], Vector]


def as_vector(value: ArrayLike, size: int, name: str) -> Vector:
    """Coerce ``value`` to a float vector of length ``size``."""

    vector = np.asarray(value, dtype=np.float64).reshape(-1)
    if vector.shape != (size,):
        raise ModelStructureError(name, f"expected length {size}, got {vector.size}")
    return vector


def as_matrix(value: ArrayLike, shape: tuple[int, int], name: str) -> Matrix:
    matrix = np.asarray(value, dtype=np.float64)
    if matrix.shape != shape:
        raise ModelStructureError(name, f"expected shape {shape}, got {matrix.shape}")
    return matrix


def skew_tolerance(matrix: Matrix) -> float:
    return current_settings().skew_rel_tol * (1.0 + float(np.linalg.norm(matrix)))


def psd_tolerance(matrix: Matrix) -> float:
    return current_settings().psd_rel_tol * (1.0 + float(np.linalg.norm(matrix)))


def is_positive_definite(min_eig: float, matrix: Matrix) -> bool:
    """Scale-relative test: min eigenvalue above psd_rel_tol * ||matrix||."""

    return min_eig > current_settings().psd_rel_tol * float(np.linalg.norm(matrix))


def _check_symmetric_psd(matrix: Matrix, name: str, *, strict: bool = False) -> None:
    tol = psd_tolerance(matrix)
    if float(np.linalg.norm(matrix - matrix.T)) > tol:
        raise ModelStructureError(name, "must be symmetric")
    min_eig = float(np.linalg.eigvalsh(0.5 * (matrix + matrix.T))[0])
    if strict and not is_positive_definite(min_eig, matrix):
        raise ModelStructureError(
            name, f"must be positive definite (min eigenvalue {min_eig:.3e})"
        )
    if not strict and min_eig < -tol:
        raise ModelStructureError(
            name, f"must be positive semidefinite (min eigenvalue {min_eig:.3e})"
        )


def _check_full_column_rank(G: Matrix) -> None:
    rank = int(np.linalg.matrix_rank(G))
    if rank != G.shape[1]:
        raise ModelStructureError(
            "G", f"must have full column rank {G.shape[1]}, got rank {rank}"
        )


@dataclass(frozen=True, slots=True, eq=False)
class PHModel:
    """General port-Hamiltonian system x' = (J(x) - R(x)) grad H(x) + G u, y = G^T grad H(x).

    ``grad_H_star`` inverts ``grad_H`` on its range; when absent the inverse is
    computed by damped Newton iterations on ``grad_H(x) = s``.
    """

    dim_state: int
    dim_input: int
    J: MatrixMap
    R: MatrixMap
    R_star: Matrix
    G: Matrix
    H: Callable[[Vector], float]
    grad_H: VectorMap
    hess_H: MatrixMap
    grad_H_star: VectorMap | None = None
    strictly_convex: bool = True
    name: str = "ph-model"

    def __post_init__(self) -> None:
        if self.dim_state < 1:
            raise ModelStructureError("dim_state", "must be a positive integer")
        if self.dim_input < 1:
            raise ModelStructureError("dim_input", "must be a positive integer")
        n, m = self.dim_state, self.dim_input
        R_star = as_matrix(self.R_star, (n, n), "R_star")
        G = as_matrix(self.G, (n, m), "G")
        _check_symmetric_psd(R_star, "R_star")
        _check_full_column_rank(G)
        object.__setattr__(self, "R_star", R_star)
        object.__setattr__(self, "G", G)

    def F(self, x: Vector) -> Matrix:
        """Return J(x) - R(x)."""

        return self.J(x) - self.R(x)


@dataclass(frozen=True, eq=False)
class QuadraticAffinePH:
    """Quadratic-affine system: F(x) = F0 + sum_i F_i x_i, H(x) = x^T Q x / 2.

    ``R0`` is stored explicitly and checked against ``F0 + F0^T = -2 R0``.
    """

    F0: Matrix
    F_list: tuple[Matrix, ...]
    Q: Matrix
    R0: Matrix
    G: Matrix
    name: str = "quadratic-affine"

    def __post_init__(self) -> None:
        F0 = np.asarray(self.F0, dtype=np.float64)
        if F0.ndim != 2 or F0.shape[0] != F0.shape[1] or F0.shape[0] < 1:
            raise ModelStructureError("F0", f"must be square, got shape {F0.shape}")
        n = F0.shape[0]
        if len(self.F_list) != n:
            raise ModelStructureError(
                "F", f"expected {n} matrices F_1..F_n, got {len(self.F_list)}"
            )
        F_list = tuple(
            as_matrix(F_i, (n, n), f"F[{index}]")
            for index, F_i in enumerate(self.F_list)
        )
        G = np.asarray(self.G, dtype=np.float64)
        if G.ndim != 2 or G.shape[0] != n or G.shape[1] < 1:
            raise ModelStructureError("G", f"expected shape ({n}, m), got {G.shape}")
        Q = as_matrix(self.Q, (n, n), "Q")
        R0 = as_matrix(self.R0, (n, n), "R0")

        for index, F_i in enumerate(F_list):
            if float(np.linalg.norm(F_i + F_i.T)) > skew_tolerance(F_i):
                raise ModelStructureError(f"F[{index}]", "must be skew-symmetric")
        if float(np.linalg.norm(F0 + F0.T + 2.0 * R0)) > psd_tolerance(F0):
            raise ModelStructureError("R0", "F0 + F0^T must equal -2 R0")
        _check_symmetric_psd(R0, "R0")
        _check_symmetric_psd(Q, "Q", strict=True)
        _check_full_column_rank(G)

        object.__setattr__(self, "F0", F0)
        object.__setattr__(self, "F_list", F_list)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R0", R0)
        object.__setattr__(self, "G", G)

    @property
    def dim_state(self) -> int:
        return self.F0.shape[0]

    @property
    def dim_input(self) -> int:
        return self.G.shape[1]

    @cached_property
    def Q_inv(self) -> Matrix:
        Q_inv = np.linalg.inv(self.Q)
        return 0.5 * (Q_inv + Q_inv.T)

    @cached_property
    def F_stack(self) -> NDArray[np.float64]:
        """F_1..F_n stacked along the first axis, shape (n, n, n)."""

        return np.stack(self.F_list)

    @cached_property
    def coenergy_coefficients(self) -> NDArray[np.float64]:
        """Matrices calF_i = sum_j F_j (Q^-1)_ij, so that calF(s) = F0 + sum_i calF_i s_i."""

        return np.einsum("ij,jab->iab", self.Q_inv, self.F_stack)

    def state_matrix(self, x: Vector) -> Matrix:
        """Return F(x) = F0 + sum_i F_i x_i."""

        return self.F0 + np.einsum("i,iab->ab", x, self.F_stack)

    def interconnection(self, x: Vector) -> Matrix:
        F = self.state_matrix(x)
        return 0.5 * (F - F.T)

    @cached_property
    def as_ph_model(self) -> PHModel:
        """General-model view with closed-form energy maps."""

        Q, Q_inv, R0 = self.Q, self.Q_inv, self.R0

        return PHModel(
            dim_state=self.dim_state,
            dim_input=self.dim_input,
            J=self.interconnection,
            R=lambda _x: R0,
            R_star=R0,
            G=self.G,
            H=lambda x: 0.5 * float(x @ Q @ x),
            grad_H=lambda x: Q @ x,
            hess_H=lambda _x: Q,
            grad_H_star=lambda s: Q_inv @ s,
            strictly_convex=True,
            name=self.name,
        )


ModelLike: TypeAlias = PHModel | QuadraticAffinePH


def as_ph_model(model: ModelLike) -> PHModel:
    if isinstance(model, QuadraticAffinePH):
        return model.as_ph_model
    return model


@dataclass(frozen=True, slots=True, eq=False)
class EquilibriumPoint:
    """Point (x_bar, u_bar) of the steady-state relation with its output and co-energy."""

    x_bar: Vector
    u_bar: Vector
    y_bar: Vector
    s_bar: Vector
    residual_norm: float
    iterations: int = 0

    def to_dict(self) -> dict[str, object]:
        return {
            "x_bar": self.x_bar.tolist(),
            "u_bar": self.u_bar.tolist(),
            "y_bar": self.y_bar.tolist(),
            "s_bar": self.s_bar.tolist(),
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
        }


@dataclass(slots=True)
class StateCheck:
    """Structural checks at one sampled state."""

    state: Vector
    skew_defect: float
    skew_tol: float
    dissipation_gap_min_eig: float
    psd_tol: float
    hessian_symmetry_defect: float
    hessian_min_eig: float
    passed: bool

    def to_dict(self) -> dict[str, object]:
        return {
            "state": self.state.tolist(),
            "skew_defect": self.skew_defect,
            "skew_tol": self.skew_tol,
            "dissipation_gap_min_eig": self.dissipation_gap_min_eig,
            "psd_tol": self.psd_tol,
            "hessian_symmetry_defect": self.hessian_symmetry_defect,
            "hessian_min_eig": self.hessian_min_eig,
            "passed": self.passed,
        }


@dataclass(slots=True)
class ValidationReport:
    checks: list[StateCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failed_count(self) -> int:
        return sum(1 for check in self.checks if not check.passed)

    def to_dict(self) -> dict[str, object]:
        return {
            "verdict": "pass" if self.passed else "fail",
            "sample_count": len(self.checks),
            "failed_count": self.failed_count,
            "max_skew_defect": max(c.skew_defect for c in self.checks),
            "min_dissipation_gap_eig": min(
                c.dissipation_gap_min_eig for c in self.checks
            ),
            "min_hessian_eig": min(c.hessian_min_eig for c in self.checks),
            "checks": [check.to_dict() for check in self.checks],
        }
