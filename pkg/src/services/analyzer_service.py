"""Shifted-passivity, stability and passivity-shortage conditions.

Every test reduces to the largest eigenvalue of a symmetric matrix built from
the Jacobian of s -> calF(s) s_bar:

    grad(calF(s) s_bar) + grad(calF(s) s_bar)^T - 2 R_star  <=  0

For quadratic-affine systems that Jacobian is the constant matrix B and the
test is exact. For general models it is sampled over a user-supplied box of
co-energy values and the report says so.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable
from enum import StrEnum
from typing import TypeAlias

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike

from src.config import current_settings
from src.models.errors import (
    AnalysisError,
    InternalConsistencyError,
    NonConvergenceError,
    NotPassifiableError,
    PreconditionError,
)
from src.models.ph_model import (
    Matrix,
    ModelLike,
    QuadraticAffinePH,
    Vector,
    as_matrix,
    as_ph_model,
    as_vector,
    is_positive_definite,
    psd_tolerance,
)
from src.models.report import ConditionReport, StabilityBranch, Verdict
from src.services.ph_service import calF, coenergy, state_from_coenergy

logger = logging.getLogger(__name__)

SampleBox: TypeAlias = tuple[ArrayLike, ArrayLike]


class MarginMode(StrEnum):
    LOCAL = "local"
    GLOBAL_SAMPLED = "global_sampled"


def build_B(sys: QuadraticAffinePH, x_bar: ArrayLike) -> Matrix:
    """B = sum_i F_i Q x_bar e_i^T Q^-1, cross-checked against sum_i calF_i Q x_bar e_i^T."""

    x_vec = as_vector(x_bar, sys.dim_state, "x_bar")
    s_bar = sys.Q @ x_vec
    columns = np.einsum("iab,b->ai", sys.F_stack, s_bar)
    B = columns @ sys.Q_inv
    B_coenergy = np.einsum("iab,b->ai", sys.coenergy_coefficients, s_bar)

    disagreement = float(np.linalg.norm(B - B_coenergy))
    allowed = current_settings().two_path_rel_tol * (1.0 + float(np.linalg.norm(B)))
    if disagreement > allowed:
        raise InternalConsistencyError(
            f"B computed in state and co-energy form disagree by {disagreement:.3e}"
        )
    return B


def _resolve_R_star(model: ModelLike, R_star: ArrayLike | None) -> Matrix:
    n = model.dim_state
    if R_star is not None:
        return as_matrix(R_star, (n, n), "R_star")
    if isinstance(model, QuadraticAffinePH):
        return model.R0
    return model.R_star


def check_affine(
    sys: QuadraticAffinePH, x_bar: ArrayLike, R_star: ArrayLike | None = None
) -> ConditionReport:
    """Constant-matrix test B + B^T - 2 R0 <= 0.

    A strict verdict also certifies global asymptotic stability of x_bar.
    ``R_star`` replaces R0 for the local relaxation on a restricted domain.
    """

    R_lower = _resolve_R_star(sys, R_star)
    B = build_B(sys, x_bar)
    report = ConditionReport.from_matrix(
        B + B.T - 2.0 * R_lower,
        psd_tolerance(R_lower),
        sample_info="constant test matrix (exact for all s)",
    )
    logger.info(
        "Affine condition for %s: lambda_max=%.6g verdict=%s",
        sys.name,
        report.lambda_max,
        report.verdict,
    )
    return report


def coenergy_jacobian(
    model: ModelLike,
    s: ArrayLike,
    s_bar: ArrayLike,
    x_guess: ArrayLike | None = None,
) -> Matrix:
    """Central-difference Jacobian of s -> calF(s) s_bar."""

    n = model.dim_state
    s_vec = as_vector(s, n, "s")
    s_bar_vec = as_vector(s_bar, n, "s_bar")
    h = current_settings().central_fd_rel_step * (1.0 + float(np.linalg.norm(s_vec)))
    jacobian = np.empty((n, n))
    for j in range(n):
        offset = np.zeros(n)
        offset[j] = h
        forward = calF(model, s_vec + offset, x_guess) @ s_bar_vec
        backward = calF(model, s_vec - offset, x_guess) @ s_bar_vec
        jacobian[:, j] = (forward - backward) / (2.0 * h)
    return jacobian


def _box_samples(
    box: SampleBox, n: int, n_samples: int, seed: int | None
) -> np.ndarray:
    low = np.broadcast_to(np.asarray(box[0], dtype=np.float64), (n,))
    high = np.broadcast_to(np.asarray(box[1], dtype=np.float64), (n,))
    if not bool(np.all(low < high)):
        raise ValueError("sample box must satisfy low < high in every coordinate")
    rng = np.random.default_rng(current_settings().sample_seed if seed is None else seed)
    return rng.uniform(low, high, size=(n_samples, n))


def _sampled_worst(
    model: ModelLike,
    x_bar: Vector,
    R_lower: Matrix,
    samples: np.ndarray,
) -> tuple[ConditionReport, float]:
    """Worst-case test matrix over the samples and the smallest sampled Hessian eigenvalue."""

    ph = as_ph_model(model)
    s_bar = coenergy(model, x_bar)
    worst_matrix: Matrix | None = None
    worst_lambda = -math.inf
    worst_s: Vector | None = None
    min_hessian = math.inf
    skipped = 0

    for s in samples:
        try:
            x_s = state_from_coenergy(model, s, x_bar)
            jacobian = coenergy_jacobian(model, s, s_bar, x_s)
        except NonConvergenceError as exc:
            skipped += 1
            logger.warning("Skipping sample s=%s: %s", np.round(s, 6).tolist(), exc)
            continue
        hess = ph.hess_H(x_s)
        min_hessian = min(min_hessian, float(np.linalg.eigvalsh(0.5 * (hess + hess.T))[0]))
        test = jacobian + jacobian.T - 2.0 * R_lower
        lambda_max = float(np.linalg.eigvalsh(0.5 * (test + test.T))[-1])
        if lambda_max > worst_lambda:
            worst_lambda, worst_matrix, worst_s = lambda_max, test, s

    evaluated = samples.shape[0] - skipped
    if worst_matrix is None or worst_s is None:
        raise AnalysisError(
            f"co-energy inversion failed at all {samples.shape[0]} samples"
        )

    report = ConditionReport.from_matrix(
        worst_matrix,
        psd_tolerance(R_lower),
        sample_info=(
            f"sampled, not a proof: worst of {evaluated} samples "
            f"({skipped} skipped) at s={np.round(worst_s, 6).tolist()}"
        ),
        worst_location=worst_s,
        samples_evaluated=evaluated,
        samples_skipped=skipped,
    )
    return report, min_hessian


def check_general(
    model: ModelLike,
    x_bar: ArrayLike,
    sample_box: SampleBox | None = None,
    n_samples: int | None = None,
    *,
    seed: int | None = None,
    R_star: ArrayLike | None = None,
) -> ConditionReport:
    """Sampled monotonicity test with finite-difference Jacobians."""

    settings = current_settings()
    n = model.dim_state
    x_vec = as_vector(x_bar, n, "x_bar")
    box = sample_box or (settings.default_sample_box[0], settings.default_sample_box[1])
    samples = _box_samples(box, n, n_samples or settings.default_samples, seed)
    report, _ = _sampled_worst(model, x_vec, _resolve_R_star(model, R_star), samples)
    logger.info(
        "Sampled condition: worst lambda_max=%.6g verdict=%s (%d skipped)",
        report.lambda_max,
        report.verdict,
        report.samples_skipped,
    )
    return report


def _branch_for(verdict: Verdict, strict_branch: StabilityBranch) -> StabilityBranch:
    if verdict is Verdict.SATISFIED_STRICTLY:
        return strict_branch
    if verdict is Verdict.SATISFIED:
        return StabilityBranch.LYAPUNOV
    return StabilityBranch.NOT_ESTABLISHED


def stability_margin(
    model: ModelLike,
    x_bar: ArrayLike,
    mode: MarginMode | str = MarginMode.LOCAL,
    *,
    sample_box: SampleBox | None = None,
    n_samples: int | None = None,
    seed: int | None = None,
) -> ConditionReport:
    """Decay margin epsilon with -2 epsilon I bounding the test matrix, and the stability branch.

    Quadratic-affine systems use the constant test matrix in either mode; their
    Hamiltonian is strongly convex with modulus lambda_min(Q), so a strict
    verdict is global.
    """

    margin_mode = MarginMode(mode)
    x_vec = as_vector(x_bar, model.dim_state, "x_bar")

    if isinstance(model, QuadraticAffinePH):
        report = check_affine(model, x_vec)
        report.strong_convexity = float(np.linalg.eigvalsh(model.Q)[0])
        report.branch = _branch_for(report.verdict, StabilityBranch.GLOBAL_ASYMPTOTIC)
        return report

    hess_bar = model.hess_H(x_vec)
    hess_bar_min = float(np.linalg.eigvalsh(0.5 * (hess_bar + hess_bar.T))[0])
    locally_convex = is_positive_definite(hess_bar_min, hess_bar)

    if margin_mode is MarginMode.LOCAL:
        if not locally_convex:
            raise PreconditionError(
                f"Hessian at x_bar is not positive definite (min eigenvalue {hess_bar_min:.3e})"
            )
        s_bar = coenergy(model, x_vec)
        jacobian = coenergy_jacobian(model, s_bar, s_bar, x_vec)
        report = ConditionReport.from_matrix(
            jacobian + jacobian.T - 2.0 * model.R_star,
            psd_tolerance(model.R_star),
            sample_info="evaluated at s_bar",
            worst_location=s_bar,
        )
        report.strong_convexity = hess_bar_min
        report.branch = _branch_for(report.verdict, StabilityBranch.LOCAL_ASYMPTOTIC)
        return report

    settings = current_settings()
    box = sample_box or (settings.default_sample_box[0], settings.default_sample_box[1])
    samples = _box_samples(box, model.dim_state, n_samples or settings.default_samples, seed)
    report, min_hessian = _sampled_worst(model, x_vec, model.R_star, samples)
    report.strong_convexity = min_hessian
    if min_hessian > 0.0:
        strict_branch = StabilityBranch.GLOBAL_ASYMPTOTIC
    elif locally_convex:
        strict_branch = StabilityBranch.LOCAL_ASYMPTOTIC
    else:
        strict_branch = StabilityBranch.NOT_ESTABLISHED
    report.branch = _branch_for(report.verdict, strict_branch)
    return report


def least_shortage(
    S: ArrayLike, G: ArrayLike, psd_tol: float | None = None
) -> tuple[float, Vector | None]:
    """Least gamma with S <= 2 gamma G G^T, or +inf with the offending direction.

    The part of S on ker(G^T) cannot be absorbed by output feedback, so a positive
    eigenvalue there means no finite gamma exists.
    """

    settings = current_settings()
    S_mat = np.asarray(S, dtype=np.float64)
    S_mat = 0.5 * (S_mat + S_mat.T)
    G_mat = np.asarray(G, dtype=np.float64)
    tol = psd_tol if psd_tol is not None else psd_tolerance(S_mat)

    kernel = scipy.linalg.null_space(G_mat.T)
    if kernel.shape[1] > 0:
        eigvals, eigvecs = np.linalg.eigh(kernel.T @ S_mat @ kernel)
        if eigvals[-1] > tol:
            return math.inf, kernel @ eigvecs[:, -1]

    GGt = G_mat @ G_mat.T

    def top_eigenpair(gamma: float) -> tuple[float, Vector]:
        eigvals, eigvecs = np.linalg.eigh(S_mat - 2.0 * gamma * GGt)
        return float(eigvals[-1]), eigvecs[:, -1]

    def feasible(gamma: float) -> bool:
        return top_eigenpair(gamma)[0] <= tol

    sigma_min = float(np.linalg.eigvalsh(G_mat.T @ G_mat)[0])
    bound = (float(np.linalg.norm(S_mat, 2)) + 1.0) / (2.0 * sigma_min)
    lo, hi = -bound, bound

    for _ in range(settings.gamma_max_expansions):
        if feasible(hi):
            break
        lo, hi = hi, 2.0 * hi
    else:
        return math.inf, top_eigenpair(hi)[1]

    for _ in range(settings.gamma_max_expansions):
        if not feasible(lo):
            break
        hi, lo = lo, 2.0 * lo
    else:
        raise AnalysisError("could not bracket gamma from below")

    while hi - lo > settings.gamma_bisection_width:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi, None


def shortage_gamma(
    sys: QuadraticAffinePH, x_bar: ArrayLike, R_star: ArrayLike | None = None
) -> ConditionReport:
    """Passivity shortage: least gamma with B + B^T - 2 R0 <= 2 gamma G G^T.

    Negative gamma certifies output-strict shifted passivity.
    """

    R_lower = _resolve_R_star(sys, R_star)
    B = build_B(sys, x_bar)
    test_matrix = B + B.T - 2.0 * R_lower
    tol = psd_tolerance(R_lower)
    gamma, offending = least_shortage(test_matrix, sys.G, tol)
    report = ConditionReport.from_matrix(
        test_matrix,
        tol,
        gamma=gamma,
        offending_vector=offending,
        input_dim=sys.dim_input,
    )
    if math.isinf(gamma):
        logger.warning(
            "No finite shortage for %s: defect on ker(G^T) along %s",
            sys.name,
            None if offending is None else np.round(offending, 6).tolist(),
        )
    else:
        logger.info("Shortage gamma for %s: %.9g", sys.name, gamma)
    return report


def design_proportional_gain(report: ConditionReport, delta: float) -> Matrix:
    """K_P = (max(gamma, 0) + delta) I for u = u_bar - K_P (y - y_bar) + v."""

    if not delta > 0:
        raise ValueError("delta must be positive")
    if report.gamma is None or report.input_dim is None:
        raise ValueError("report carries no shortage; run shortage_gamma first")
    if math.isinf(report.gamma):
        raise NotPassifiableError("not output-feedback passifiable by this condition")
    return (max(report.gamma, 0.0) + delta) * np.eye(report.input_dim)


def _monotone_growth(
    model: ModelLike,
    x_bar: ArrayLike,
    pairs: Iterable[tuple[ArrayLike, ArrayLike]],
    gamma: float | None,
    R_star: ArrayLike | None,
) -> tuple[float, float]:
    n = model.dim_state
    x_vec = as_vector(x_bar, n, "x_bar")
    s_bar = coenergy(model, x_vec)
    R_lower = _resolve_R_star(model, R_star)
    GGt = model.G @ model.G.T
    shift = 0.0 if gamma is None else gamma

    def monotone_map(s: Vector) -> Vector:
        return calF(model, s, x_vec) @ s_bar - R_lower @ s - shift * (GGt @ s)

    worst = -math.inf
    widest = 0.0
    for raw_first, raw_second in pairs:
        first = as_vector(raw_first, n, "s1")
        second = as_vector(raw_second, n, "s2")
        value = float((first - second) @ (monotone_map(first) - monotone_map(second)))
        worst = max(worst, value)
        widest = max(widest, float((first - second) @ (first - second)))
    if worst == -math.inf:
        raise ValueError("pairs must be nonempty")
    return worst, widest


def monotonicity_probe(
    model: ModelLike,
    x_bar: ArrayLike,
    pairs: Iterable[tuple[ArrayLike, ArrayLike]],
    *,
    gamma: float | None = None,
    R_star: ArrayLike | None = None,
) -> float:
    """Largest (s1 - s2)^T (M(s1) - M(s2)) with M(s) = calF(s) s_bar - R_star s.

    With ``gamma`` the tested map is M(s) - gamma G G^T s.
    """

    worst, _ = _monotone_growth(model, x_bar, pairs, gamma, R_star)
    return worst


def monotonicity_holds(
    model: ModelLike,
    x_bar: ArrayLike,
    pairs: Iterable[tuple[ArrayLike, ArrayLike]],
    *,
    gamma: float | None = None,
    R_star: ArrayLike | None = None,
) -> bool:
    """Monotonicity verdict at monotonicity_abs_tol * (1 + max ||s1 - s2||^2)."""

    worst, widest = _monotone_growth(model, x_bar, pairs, gamma, R_star)
    tolerance = current_settings().monotonicity_abs_tol * (1.0 + widest)
    if worst > tolerance:
        logger.warning(
            "Monotonicity check found growth %.3e above tolerance %.3e", worst, tolerance
        )
        return False
    return True
