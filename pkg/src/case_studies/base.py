"""Shared pieces of the case-study builders: parameter files and run results."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import TypeVar

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from src.config import current_settings
from src.models.errors import InternalConsistencyError, ModelFileError
from src.models.ph_model import EquilibriumPoint, Matrix, QuadraticAffinePH
from src.models.report import ConditionReport

logger = logging.getLogger(__name__)

ParamsT = TypeVar("ParamsT", bound="CaseParams")


class CaseParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


def format_loc(loc: tuple[int | str, ...]) -> str:
    """Render a pydantic error location as ``a.b[2][0]``."""

    rendered = ""
    for part in loc:
        if isinstance(part, int):
            rendered += f"[{part}]"
        else:
            rendered += f".{part}" if rendered else str(part)
    return rendered or "<root>"


def params_from_dict(params_type: type[ParamsT], payload: object, source: str) -> ParamsT:
    try:
        return params_type.model_validate(payload)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ModelFileError(
            f"{source}: field {format_loc(tuple(first['loc']))}: {first['msg']}"
        ) from exc


def load_params(params_type: type[ParamsT], path: str | Path) -> ParamsT:
    """Read a JSON parameter file; errors name the field or the line and column."""

    file_path = Path(path)
    try:
        payload = json.loads(file_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ModelFileError(f"{file_path}: cannot read parameter file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ModelFileError(
            f"{file_path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    return params_from_dict(params_type, payload, str(file_path))


def default_params_path(name: str) -> Path:
    return Path(__file__).parent / "params" / f"{name}_default.json"


def assert_same_matrix(derived: Matrix, hand_coded: Matrix, what: str) -> None:
    """Raise when the build_B path and the closed-form path disagree."""

    scale = 1.0 + float(np.max(np.abs(hand_coded)))
    gap = float(np.max(np.abs(derived - hand_coded)))
    if gap > 1e-10 * scale:
        raise InternalConsistencyError(
            f"{what}: build_B path and closed form differ by {gap:.3e}"
        )


@dataclass(slots=True)
class CaseResult:
    """Everything a case-study run produces."""

    case: str
    model: QuadraticAffinePH
    equilibrium: EquilibriumPoint
    report: ConditionReport
    shortage: ConditionReport
    condition_matrix: Matrix
    extras: dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> dict[str, object]:
        payload: dict[str, object] = {
            "case": self.case,
            "model_name": self.model.name,
            "equilibrium": self.equilibrium.to_dict(),
            "condition_matrix": self.condition_matrix.tolist(),
            "report": self.report.to_dict(),
            "shortage": self.shortage.to_dict(),
            "app": current_settings().app_name,
        }
        payload.update(self.extras)
        return payload
