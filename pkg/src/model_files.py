"""JSON model files, JSON reports and CSV trajectories.

Model schema (all matrices row-major arrays of arrays)::

    {"n": 3, "m": 3, "F0": [[...]], "F": [[[...]], ...], "Q": [[...]],
     "R0": [[...]], "G": [[...]], "name": "...", "x_bar": [...], "u_bar": [...],
     "meta": {...}}

Floats are written with the shortest repr that round-trips, so a dumped model
re-parses to bit-identical matrices.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Any

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

from src import __version__
from src.case_studies.base import format_loc
from src.models.errors import ModelFileError, ModelStructureError
from src.models.ph_model import QuadraticAffinePH, Vector
from src.models.trajectory import Trajectory

logger = logging.getLogger(__name__)

MatrixRows = list[list[float]]


class ModelFileSchema(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n: int
    m: int
    F0: MatrixRows
    F: list[MatrixRows]
    Q: MatrixRows
    R0: MatrixRows
    G: MatrixRows
    name: str = "quadratic-affine"
    x_bar: list[float] | None = None
    u_bar: list[float] | None = None
    meta: dict[str, Any] = {}

    @model_validator(mode="after")
    def _check_shapes(self) -> ModelFileSchema:
        n, m = self.n, self.m
        if n < 1 or m < 1:
            raise ValueError("n and m must be positive")
        _require_shape("F0", self.F0, n, n)
        if len(self.F) != n:
            raise ValueError(f"F: expected {n} matrices, got {len(self.F)}")
        for index, F_i in enumerate(self.F):
            _require_shape(f"F[{index}]", F_i, n, n)
        _require_shape("Q", self.Q, n, n)
        _require_shape("R0", self.R0, n, n)
        _require_shape("G", self.G, n, m)
        if self.x_bar is not None and len(self.x_bar) != n:
            raise ValueError(f"x_bar: expected length {n}, got {len(self.x_bar)}")
        if self.u_bar is not None and len(self.u_bar) != m:
            raise ValueError(f"u_bar: expected length {m}, got {len(self.u_bar)}")
        return self


def _require_shape(name: str, rows: MatrixRows, n_rows: int, n_cols: int) -> None:
    if len(rows) != n_rows or any(len(row) != n_cols for row in rows):
        raise ValueError(f"{name}: expected shape ({n_rows}, {n_cols})")


@dataclass(slots=True)
class ModelFile:
    """A parsed model plus the optional equilibrium data stored beside it."""

    model: QuadraticAffinePH
    x_bar: Vector | None = None
    u_bar: Vector | None = None
    meta: dict[str, Any] = field(default_factory=dict)


def _parse_json(text: str, source: str) -> object:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(
            f"{source}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc


def model_from_payload(payload: object, source: str = "<model>") -> ModelFile:
    """Validate an already-decoded model document."""

    try:
        schema = ModelFileSchema.model_validate(payload)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ModelFileError(
            f"{source}: field {format_loc(tuple(first['loc']))}: {first['msg']}"
        ) from exc

    try:
        model = QuadraticAffinePH(
            F0=np.array(schema.F0, dtype=np.float64),
            F_list=tuple(np.array(F_i, dtype=np.float64) for F_i in schema.F),
            Q=np.array(schema.Q, dtype=np.float64),
            R0=np.array(schema.R0, dtype=np.float64),
            G=np.array(schema.G, dtype=np.float64),
            name=schema.name,
        )
    except ModelStructureError as exc:
        raise ModelFileError(f"{source}: field {exc}") from exc

    return ModelFile(
        model=model,
        x_bar=None if schema.x_bar is None else np.array(schema.x_bar),
        u_bar=None if schema.u_bar is None else np.array(schema.u_bar),
        meta=schema.meta,
    )


def parse_model(text: str, source: str = "<model>") -> ModelFile:
    return model_from_payload(_parse_json(text, source), source)


def load_model(path: str | Path) -> ModelFile:
    file_path = Path(path)
    try:
        text = file_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ModelFileError(f"{file_path}: cannot read model file: {exc}") from exc
    parsed = parse_model(text, str(file_path))
    logger.info(
        "Loaded model %s (n=%d, m=%d) from %s",
        parsed.model.name,
        parsed.model.dim_state,
        parsed.model.dim_input,
        file_path,
    )
    return parsed


def model_to_dict(
    model: QuadraticAffinePH,
    *,
    x_bar: Vector | None = None,
    u_bar: Vector | None = None,
    meta: dict[str, Any] | None = None,
) -> dict[str, object]:
    payload: dict[str, object] = {
        "n": model.dim_state,
        "m": model.dim_input,
        "name": model.name,
        "F0": model.F0.tolist(),
        "F": [F_i.tolist() for F_i in model.F_list],
        "Q": model.Q.tolist(),
        "R0": model.R0.tolist(),
        "G": model.G.tolist(),
    }
    if x_bar is not None:
        payload["x_bar"] = np.asarray(x_bar, dtype=np.float64).tolist()
    if u_bar is not None:
        payload["u_bar"] = np.asarray(u_bar, dtype=np.float64).tolist()
    if meta:
        payload["meta"] = meta
    return payload


def dump_model(model_file: ModelFile, path: str | Path) -> None:
    payload = model_to_dict(
        model_file.model,
        x_bar=model_file.x_bar,
        u_bar=model_file.u_bar,
        meta=model_file.meta,
    )
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def _json_safe(value: object) -> object:
    if isinstance(value, float) and not math.isfinite(value):
        return "inf" if value > 0 else ("-inf" if value < 0 else "nan")
    if isinstance(value, dict):
        return {str(key): _json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(item) for item in value]
    if isinstance(value, np.ndarray):
        return _json_safe(value.tolist())
    if isinstance(value, np.generic):
        return _json_safe(value.item())
    if isinstance(value, Path):
        return str(value)
    return value


def build_report(
    command: str, body: dict[str, object], config: dict[str, object]
) -> dict[str, object]:
    """Attach the tool version and the resolved run configuration to a report body."""

    return _json_safe(
        {"tool": "shifted-passivity", "version": __version__, "command": command}
        | body
        | {"config": config}
    )  # type: ignore[return-value]


def write_json(payload: dict[str, object], stream: IO[str]) -> None:
    stream.write(json.dumps(_json_safe(payload), indent=2, allow_nan=False) + "\n")


def write_trajectory_csv(
    traj: Trajectory, stream: IO[str], *, max_rows: int | None = None
) -> int:
    """Write ``t,x1..xn,u1..um,y1..ym,Hshift`` rows; returns the row stride used."""

    rows = traj.as_rows()
    stride = 1 if max_rows is None else max(1, math.ceil(rows.shape[0] / max_rows))
    selected = rows[::stride]
    if stride > 1 and not np.array_equal(selected[-1], rows[-1]):
        selected = np.vstack((selected, rows[-1]))
    np.savetxt(
        stream,
        selected,
        delimiter=",",
        header=",".join(traj.header()),
        comments="",
        fmt="%.17g",
    )
    return stride
