"""Sampled trajectories and dissipation findings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from src.models.ph_model import Vector


@dataclass(slots=True, eq=False)
class Trajectory:
    """States, inputs and outputs on a time grid.

    ``shifted_H`` is the Bregman storage relative to ``x_ref``. For closed-loop
    runs ``inputs`` holds u_bar + v(t) and ``plant_inputs`` the input actually
    applied to the plant.
    """

    times: Vector
    states: NDArray[np.float64]
    inputs: NDArray[np.float64]
    outputs: NDArray[np.float64]
    shifted_H: Vector
    x_ref: Vector
    plant_inputs: NDArray[np.float64] | None = None

    def __post_init__(self) -> None:
        count = self.times.shape[0]
        for name in ("states", "inputs", "outputs", "shifted_H"):
            if getattr(self, name).shape[0] != count:
                raise ValueError(f"{name} length does not match times ({count})")
        if count > 1 and not bool(np.all(np.diff(self.times) > 0)):
            raise ValueError("times must be strictly increasing")

    @property
    def final_state(self) -> Vector:
        return self.states[-1]

    def as_rows(self) -> NDArray[np.float64]:
        """Rows ``t, x1..xn, u1..um, y1..ym, Hshift``."""

        return np.column_stack(
            (self.times, self.states, self.inputs, self.outputs, self.shifted_H)
        )

    def header(self) -> list[str]:
        n = self.states.shape[1]
        m = self.inputs.shape[1]
        return (
            ["t"]
            + [f"x{i}" for i in range(1, n + 1)]
            + [f"u{i}" for i in range(1, m + 1)]
            + [f"y{i}" for i in range(1, m + 1)]
            + ["Hshift"]
        )


@dataclass(slots=True)
class DissipationReport:
    passed: bool
    worst_violation: float
    worst_time: float
    tolerance: float
    gamma: float
    steps: int

    def to_dict(self) -> dict[str, object]:
        return {
            "passed": self.passed,
            "worst_violation": self.worst_violation,
            "worst_time": self.worst_time,
            "tolerance": self.tolerance,
            "gamma": self.gamma,
            "steps": self.steps,
        }
