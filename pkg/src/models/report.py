"""Condition reports produced by the analyzer."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import StrEnum

import numpy as np

from src.models.ph_model import Matrix, Vector


class Verdict(StrEnum):
    SATISFIED = "satisfied"
    SATISFIED_STRICTLY = "satisfied_strictly"
    VIOLATED = "violated"


class StabilityBranch(StrEnum):
    GLOBAL_ASYMPTOTIC = "global_asymptotic"
    LOCAL_ASYMPTOTIC = "local_asymptotic"
    LYAPUNOV = "lyapunov"
    NOT_ESTABLISHED = "not_established"


def classify(lambda_max: float, psd_tol: float) -> Verdict:
    """Map the largest eigenvalue of a test matrix to a verdict band.

    |lambda_max| within the tolerance band counts as satisfied but not strict.
    """

    if lambda_max > psd_tol:
        return Verdict.VIOLATED
    if lambda_max < -2.0 * psd_tol:
        return Verdict.SATISFIED_STRICTLY
    return Verdict.SATISFIED


def margin_from(lambda_max: float, verdict: Verdict) -> float:
    if verdict is Verdict.SATISFIED_STRICTLY:
        return -0.5 * lambda_max
    return 0.0


def _encode_float(value: float | None) -> float | str | None:
    if value is None:
        return None
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


@dataclass(slots=True)
class ConditionReport:
    """Outcome of an eigenvalue test on a symmetric condition matrix."""

    test_matrix: Matrix
    lambda_max: float
    verdict: Verdict
    epsilon: float
    psd_tol: float
    gamma: float | None = None
    sample_info: str | None = None
    worst_location: Vector | None = None
    offending_vector: Vector | None = None
    input_dim: int | None = None
    branch: StabilityBranch | None = None
    strong_convexity: float | None = None
    samples_evaluated: int | None = None
    samples_skipped: int | None = None

    @classmethod
    def from_matrix(
        cls, test_matrix: Matrix, psd_tol: float, **extra: object
    ) -> ConditionReport:
        symmetric = 0.5 * (test_matrix + test_matrix.T)
        lambda_max = float(np.linalg.eigvalsh(symmetric)[-1])
        verdict = classify(lambda_max, psd_tol)
        return cls(
            test_matrix=symmetric,
            lambda_max=lambda_max,
            verdict=verdict,
            epsilon=margin_from(lambda_max, verdict),
            psd_tol=psd_tol,
            **extra,  # type: ignore[arg-type]
        )

    @property
    def satisfied(self) -> bool:
        return self.verdict is not Verdict.VIOLATED

    def to_dict(self) -> dict[str, object]:
        payload: dict[str, object] = {
            "test_matrix": self.test_matrix.tolist(),
            "lambda_max": self.lambda_max,
            "verdict": str(self.verdict),
            "epsilon": self.epsilon,
            "psd_tol": self.psd_tol,
            "gamma": _encode_float(self.gamma),
        }
        if self.sample_info is not None:
            payload["sample_info"] = self.sample_info
        if self.worst_location is not None:
            payload["worst_location"] = self.worst_location.tolist()
        if self.offending_vector is not None:
            payload["offending_vector"] = self.offending_vector.tolist()
        if self.input_dim is not None:
            payload["input_dim"] = self.input_dim
        if self.branch is not None:
            payload["branch"] = str(self.branch)
        if self.strong_convexity is not None:
            payload["strong_convexity"] = self.strong_convexity
        if self.samples_evaluated is not None:
            payload["samples_evaluated"] = self.samples_evaluated
            payload["samples_skipped"] = self.samples_skipped
        return payload
