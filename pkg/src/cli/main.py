"""Command-line front end.

Exit status: 0 when the run succeeds and every verdict is satisfied, 2 when a
condition is violated, gamma is infinite or a dissipation check fails, 1 on
tool errors (bad files, solver failures, usage errors).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import sys
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Final, NoReturn, cast

import numpy as np
from pydantic import ValidationError

from src.case_studies import (
    RigidBodyParams,
    SyncGenParams,
    load_params,
    run_rigid_body_case,
    run_sync_gen_case,
)
from src.case_studies.base import CaseResult, default_params_path
from src.config import current_settings, settings_override
from src.model_files import (
    ModelFile,
    build_report,
    dump_model,
    load_model,
    write_json,
    write_trajectory_csv,
)
from src.models.errors import PassivityError, PreconditionError
from src.models.ph_model import EquilibriumPoint, QuadraticAffinePH
from src.models.report import Verdict
from src.models.trajectory import Trajectory
from src.services.analyzer_service import (
    MarginMode,
    check_affine,
    check_general,
    design_proportional_gain,
    shortage_gamma,
    stability_margin,
)
from src.services.equilibrium_service import equilibrium_from_state, find_equilibrium
from src.services.ph_service import validate
from src.services.simulation_service import (
    InputSignal,
    closed_loop,
    constant_input,
    integrate,
    integrate_batch,
    sinusoidal_input,
    tabulated_input,
    verify_dissipation,
)

logger = logging.getLogger(__name__)

COMMANDS: Final[tuple[str, ...]] = (
    "validate",
    "equilibrium",
    "check",
    "gamma",
    "margin",
    "simulate",
    "case",
)
EXIT_OK: Final = 0
EXIT_ERROR: Final = 1
EXIT_FINDING: Final = 2
_TOLERANCE_FLAGS: Final[tuple[str, ...]] = (
    "psd_rel_tol",
    "skew_rel_tol",
    "equilibrium_tol",
    "dissipation_rel_tol",
)


class UsageError(PassivityError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        raise UsageError(message)


@dataclass(frozen=True)
class RunConfig:
    command: str
    model_path: Path | None = None
    output_path: Path | None = None
    report_path: Path | None = None
    trajectory_path: Path | None = None
    case: str | None = None
    params_path: Path | None = None
    model_out: Path | None = None
    x_bar: tuple[float, ...] | None = None
    u_bar: tuple[float, ...] | None = None
    x0: tuple[float, ...] | None = None
    general: bool = False
    mode: str = MarginMode.LOCAL.value
    sample_box: tuple[float, float] | None = None
    n_samples: int | None = None
    seed: int | None = None
    h: float | None = None
    t_end: float | None = None
    input_kind: str = "const"
    amplitude: float = 0.1
    frequency: float = 1.0
    input_file: Path | None = None
    kp: float | None = None
    delta: float | None = None
    batch: int | None = None
    simulate: bool = False
    tolerances: tuple[tuple[str, float], ...] = ()
    log_level: str | None = None

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        for name, value in self.tolerances:
            if not value > 0:
                raise UsageError(f"--{name.replace('_', '-')} must be > 0")
        for name in ("h", "t_end", "delta"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise UsageError(f"--{name.replace('_', '-')} must be > 0")
        if self.kp is not None and self.kp < 0:
            raise UsageError("--kp must be >= 0")
        if self.batch is not None and self.batch < 1:
            raise UsageError("--batch must be >= 1")
        if self.n_samples is not None and self.n_samples < 1:
            raise UsageError("--samples must be >= 1")

    def to_dict(self) -> dict[str, object]:
        return dataclasses.asdict(self)


def _split_floats(raw_value: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in raw_value.split(",") if part.strip())
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {raw_value!r}") from exc


def _box(raw_value: str) -> tuple[float, float]:
    values = _split_floats(raw_value)
    if len(values) != 2 or not values[0] < values[1]:
        raise UsageError("--box must be 'low,high' with low < high")
    return values[0], values[1]


def _add_model(parser: argparse.ArgumentParser) -> None:
    _ = parser.add_argument("model", type=Path, help="Model file (JSON).")


def _add_equilibrium(parser: argparse.ArgumentParser) -> None:
    _ = parser.add_argument(
        "--x-bar", type=_split_floats, help="Equilibrium state (comma-separated)."
    )
    _ = parser.add_argument(
        "--u-bar", type=_split_floats, help="Constant input whose equilibrium is solved for."
    )


def _add_sampling(parser: argparse.ArgumentParser) -> None:
    _ = parser.add_argument("--box", type=_box, help="Sampling box 'low,high'.")
    _ = parser.add_argument("--samples", type=int, help="Number of samples.")
    _ = parser.add_argument("--seed", type=int, help="Sampling seed.")


def _add_simulation(parser: argparse.ArgumentParser) -> None:
    _ = parser.add_argument("--x0", type=_split_floats, help="Initial state.")
    _ = parser.add_argument("--t-end", type=float, help="Final time.")
    _ = parser.add_argument("--h", type=float, help="RK4 step.")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="shifted-passivity",
        description="Shifted passivity, stability and shortage analysis of port-Hamiltonian models.",
    )
    _ = parser.add_argument("--log-level", help="Logging level (default: settings).")
    _ = parser.add_argument("--output", type=Path, help="Write the report here instead of stdout.")
    for name in _TOLERANCE_FLAGS:
        _ = parser.add_argument(f"--{name.replace('_', '-')}", type=float, dest=name)
    commands = parser.add_subparsers(dest="command", required=True)

    validate_parser = commands.add_parser("validate", help="Structural checks at sampled states.")
    _add_model(validate_parser)
    _add_sampling(validate_parser)

    equilibrium_parser = commands.add_parser("equilibrium", help="Solve for a forced equilibrium.")
    _add_model(equilibrium_parser)
    _ = equilibrium_parser.add_argument("--u", type=_split_floats, dest="u_bar")
    _ = equilibrium_parser.add_argument("--x0", type=_split_floats)

    check_parser = commands.add_parser("check", help="Shifted-passivity condition.")
    _add_model(check_parser)
    _add_equilibrium(check_parser)
    _ = check_parser.add_argument(
        "--general", action="store_true", help="Use the sampled general-model test."
    )
    _add_sampling(check_parser)

    gamma_parser = commands.add_parser("gamma", help="Passivity shortage and gain design.")
    _add_model(gamma_parser)
    _add_equilibrium(gamma_parser)
    _ = gamma_parser.add_argument("--delta", type=float, help="Gain design slack.")

    margin_parser = commands.add_parser("margin", help="Stability margin and branch.")
    _add_model(margin_parser)
    _add_equilibrium(margin_parser)
    _ = margin_parser.add_argument(
        "--mode", choices=[mode.value for mode in MarginMode], default=MarginMode.LOCAL.value
    )
    _add_sampling(margin_parser)

    simulate_parser = commands.add_parser("simulate", help="RK4 trajectory as CSV.")
    _add_model(simulate_parser)
    _add_equilibrium(simulate_parser)
    _add_simulation(simulate_parser)
    _ = simulate_parser.add_argument(
        "--u", choices=("const", "sin", "file"), default="const", dest="input_kind"
    )
    _ = simulate_parser.add_argument("--amplitude", type=float, default=0.1)
    _ = simulate_parser.add_argument("--frequency", type=float, default=1.0)
    _ = simulate_parser.add_argument(
        "--u-file", type=Path, dest="input_file", help="CSV with columns t,u1..um."
    )
    _ = simulate_parser.add_argument("--kp", type=float, help="Output feedback gain K_P = kp I.")
    _ = simulate_parser.add_argument(
        "--batch", type=int, help="Run this many random initial states drawn from --box."
    )
    _ = simulate_parser.add_argument("--box", type=_box)
    _ = simulate_parser.add_argument("--seed", type=int)
    _ = simulate_parser.add_argument("--report", type=Path, dest="report_path")

    case_parser = commands.add_parser("case", help="Built-in case studies.")
    _ = case_parser.add_argument("case", choices=("sync-gen", "rigid-body"))
    _ = case_parser.add_argument("--params", type=Path, dest="params_path")
    _ = case_parser.add_argument("--model-out", type=Path)
    _ = case_parser.add_argument("--simulate", action="store_true")
    _add_simulation(case_parser)
    _ = case_parser.add_argument(
        "--trajectory-out", type=Path, dest="trajectory_path", help="CSV path for the simulated trajectory."
    )
    return parser


def parse_args(argv: Sequence[str] | None = None) -> RunConfig:
    parsed = vars(_build_parser().parse_args(argv))
    command = cast(str, parsed.pop("command"))
    tolerances = tuple(
        (name, cast(float, parsed.pop(name)))
        for name in _TOLERANCE_FLAGS
        if parsed.get(name) is not None
    )
    for name in _TOLERANCE_FLAGS:
        parsed.pop(name, None)

    renamed = {
        "model": "model_path",
        "output": "output_path",
        "box": "sample_box",
        "samples": "n_samples",
    }
    options: dict[str, object] = {}
    for key, value in parsed.items():
        if value is None:
            continue
        options[renamed.get(key, key)] = value
    return RunConfig(command=command, tolerances=tolerances, **options)  # type: ignore[arg-type]


def _configure_logging(level_name: str | None) -> None:
    level = (level_name or current_settings().log_level).upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _resolved_config(config: RunConfig) -> dict[str, object]:
    """RunConfig with defaults replaced by the values in effect for this run."""

    settings = current_settings()
    resolved = config.to_dict()
    resolved["tolerances"] = {name: getattr(settings, name) for name in _TOLERANCE_FLAGS}
    defaults: dict[str, object] = {
        "h": settings.default_step,
        "t_end": settings.default_t_end,
        "n_samples": settings.default_samples,
        "sample_box": list(settings.default_sample_box),
        "seed": settings.sample_seed,
    }
    for key, value in defaults.items():
        if resolved.get(key) is None:
            resolved[key] = value
    return resolved


def _resolve_equilibrium(
    config: RunConfig, model_file: ModelFile, *, required: bool = True
) -> EquilibriumPoint | None:
    model = model_file.model
    x_bar = config.x_bar if config.x_bar is not None else model_file.x_bar
    u_bar = config.u_bar if config.u_bar is not None else model_file.u_bar
    solving = config.command == "equilibrium"
    if x_bar is not None and not (solving and u_bar is not None):
        return equilibrium_from_state(model, x_bar, u_bar)
    if u_bar is not None:
        return find_equilibrium(model, u_bar, config.x0 if solving else None)
    if required:
        raise PreconditionError(
            "no equilibrium: pass --x-bar or --u-bar, or store x_bar/u_bar in the model file"
        )
    return None


def _sample_box(config: RunConfig) -> tuple[float, float]:
    if config.sample_box is not None:
        return config.sample_box
    low, high = current_settings().default_sample_box
    return low, high


def _input_signal(config: RunConfig, level: np.ndarray) -> InputSignal:
    if config.input_kind == "sin":
        return sinusoidal_input(level, config.amplitude, config.frequency)
    if config.input_kind == "file":
        if config.input_file is None:
            raise UsageError("--u file needs --u-file")
        table = np.loadtxt(config.input_file, delimiter=",", skiprows=1, ndmin=2)
        return tabulated_input(table[:, 0], table[:, 1:])
    return constant_input(level)


def _finding_code(flag: bool) -> int:
    return EXIT_FINDING if flag else EXIT_OK


def _emit(payload: dict[str, object], config: RunConfig, stdout: IO[str]) -> None:
    if config.output_path is None:
        write_json(payload, stdout)
        return
    with config.output_path.open("w", encoding="utf-8") as handle:
        write_json(payload, handle)


def _write_csv(traj: Trajectory, path: Path | None, stdout: IO[str]) -> None:
    max_rows = current_settings().report_max_rows
    if path is None:
        write_trajectory_csv(traj, stdout, max_rows=max_rows)
        return
    with path.open("w", encoding="utf-8", newline="") as handle:
        write_trajectory_csv(traj, handle, max_rows=max_rows)


def _run_validate(config: RunConfig, model_file: ModelFile) -> tuple[dict[str, object], int]:
    model = model_file.model
    low, high = _sample_box(config)
    seed = current_settings().sample_seed if config.seed is None else config.seed
    rng = np.random.default_rng(seed)
    count = config.n_samples or current_settings().default_samples
    report = validate(model, rng.uniform(low, high, size=(count, model.dim_state)))
    return {"validation": report.to_dict()}, _finding_code(not report.passed)


def _run_check(config: RunConfig, model_file: ModelFile) -> tuple[dict[str, object], int]:
    eqpt = cast(EquilibriumPoint, _resolve_equilibrium(config, model_file))
    if config.general:
        report = check_general(
            model_file.model,
            eqpt.x_bar,
            config.sample_box,
            config.n_samples,
            seed=config.seed,
        )
    else:
        report = check_affine(model_file.model, eqpt.x_bar)
    body = {"equilibrium": eqpt.to_dict(), "report": report.to_dict()}
    return body, _finding_code(report.verdict is Verdict.VIOLATED)


def _run_gamma(config: RunConfig, model_file: ModelFile) -> tuple[dict[str, object], int]:
    eqpt = cast(EquilibriumPoint, _resolve_equilibrium(config, model_file))
    report = shortage_gamma(model_file.model, eqpt.x_bar)
    body: dict[str, object] = {"equilibrium": eqpt.to_dict(), "report": report.to_dict()}
    infeasible = report.gamma is None or math.isinf(report.gamma)
    if config.delta is not None and not infeasible:
        body["K_P"] = design_proportional_gain(report, config.delta).tolist()
    return body, _finding_code(infeasible)


def _run_margin(config: RunConfig, model_file: ModelFile) -> tuple[dict[str, object], int]:
    eqpt = cast(EquilibriumPoint, _resolve_equilibrium(config, model_file))
    report = stability_margin(
        model_file.model,
        eqpt.x_bar,
        config.mode,
        sample_box=config.sample_box,
        n_samples=config.n_samples,
        seed=config.seed,
    )
    body = {"equilibrium": eqpt.to_dict(), "report": report.to_dict()}
    return body, _finding_code(report.verdict is Verdict.VIOLATED)


def _simulate_model(
    config: RunConfig, model: QuadraticAffinePH, eqpt: EquilibriumPoint | None, stdout: IO[str]
) -> tuple[dict[str, object], int]:
    settings = current_settings()
    t_end = config.t_end or settings.default_t_end
    h = config.h or settings.default_step
    x_ref = None if eqpt is None else eqpt.x_bar
    level = np.zeros(model.dim_input) if eqpt is None else eqpt.u_bar

    if config.kp is not None:
        if eqpt is None:
            raise PreconditionError("--kp needs an equilibrium (--x-bar or --u-bar)")
        gain = config.kp * np.eye(model.dim_input)
        signal = _input_signal(config, np.zeros(model.dim_input))
        feedback: tuple[EquilibriumPoint, np.ndarray] | None = (eqpt, gain)
    else:
        signal = _input_signal(config, level)
        feedback = None

    if config.batch is not None:
        low, high = _sample_box(config)
        seed = settings.sample_seed if config.seed is None else config.seed
        rng = np.random.default_rng(seed)
        starts = rng.uniform(low, high, size=(config.batch, model.dim_state))
        trajectories = integrate_batch(
            model, signal, starts, t_end, h, x_ref=x_ref, feedback=feedback
        )
    else:
        x0 = config.x0 if config.x0 is not None else (
            np.zeros(model.dim_state) if eqpt is None else eqpt.x_bar
        )
        if feedback is not None:
            trajectories = [closed_loop(model, feedback[0], feedback[1], signal, x0, t_end, h)]
        else:
            trajectories = [integrate(model, signal, x0, t_end, h, x_ref=x_ref)]
        if config.command == "simulate":
            _write_csv(trajectories[0], config.output_path, stdout)
        elif config.trajectory_path is not None:
            _write_csv(trajectories[0], config.trajectory_path, stdout)

    body: dict[str, object] = {
        "runs": len(trajectories),
        "t_end": t_end,
        "h": h,
        "final_states": [traj.final_state.tolist() for traj in trajectories],
    }
    if eqpt is None:
        return body, EXIT_OK

    reports = [verify_dissipation(traj, eqpt) for traj in trajectories]
    worst = max(reports, key=lambda item: item.worst_violation)
    passed = all(item.passed for item in reports)
    body["dissipation"] = {
        "passed": passed,
        "failed_runs": sum(1 for item in reports if not item.passed),
        "worst": worst.to_dict(),
    }
    logger.info(
        "Simulated %d run(s); dissipation %s",
        len(reports),
        "passed" if passed else "violated",
    )
    return body, _finding_code(not passed)


def _run_simulate(
    config: RunConfig, model_file: ModelFile, stdout: IO[str]
) -> tuple[dict[str, object], int]:
    eqpt = _resolve_equilibrium(config, model_file, required=config.kp is not None)
    body, code = _simulate_model(config, model_file.model, eqpt, stdout)
    if config.batch is not None:
        _emit(build_report("simulate", body, _resolved_config(config)), config, stdout)
    elif config.report_path is not None:
        with config.report_path.open("w", encoding="utf-8") as handle:
            write_json(build_report("simulate", body, _resolved_config(config)), handle)
    return body, code


def _run_case(config: RunConfig, stdout: IO[str]) -> tuple[dict[str, object], int]:
    name = cast(str, config.case)
    result: CaseResult
    if name == "rigid-body":
        path = config.params_path or default_params_path("rigid_body")
        rigid_params = load_params(RigidBodyParams, path)
        result = run_rigid_body_case(rigid_params)
        params_payload = rigid_params.model_dump()
    else:
        path = config.params_path or default_params_path("sync_gen")
        gen_params = load_params(SyncGenParams, path)
        result = run_sync_gen_case(gen_params)
        params_payload = gen_params.model_dump()

    if config.model_out is not None:
        dump_model(
            ModelFile(
                model=result.model,
                x_bar=result.equilibrium.x_bar,
                u_bar=result.equilibrium.u_bar,
                meta={"case": name, "params": params_payload},
            ),
            config.model_out,
        )
        logger.info("Wrote %s model to %s", name, config.model_out)

    body = result.to_dict() | {"params": params_payload}
    code = _finding_code(result.report.verdict is Verdict.VIOLATED)
    if config.simulate:
        simulation, sim_code = _simulate_model(config, result.model, result.equilibrium, stdout)
        body["simulation"] = simulation
        code = max(code, sim_code)
    return body, code


def run(config: RunConfig, stdout: IO[str] | None = None) -> int:
    """Execute one command; writes the JSON report (or CSV) and returns the exit status."""

    out = sys.stdout if stdout is None else stdout
    with settings_override(**dict(config.tolerances)):
        return _run_scoped(config, out)


def _run_scoped(config: RunConfig, out: IO[str]) -> int:
    try:
        if config.command == "case":
            body, code = _run_case(config, out)
        else:
            model_file = load_model(cast(Path, config.model_path))
            if config.command == "validate":
                body, code = _run_validate(config, model_file)
            elif config.command == "equilibrium":
                eqpt = cast(EquilibriumPoint, _resolve_equilibrium(config, model_file))
                body, code = {"equilibrium": eqpt.to_dict()}, EXIT_OK
            elif config.command == "check":
                body, code = _run_check(config, model_file)
            elif config.command == "gamma":
                body, code = _run_gamma(config, model_file)
            elif config.command == "margin":
                body, code = _run_margin(config, model_file)
            else:
                _, code = _run_simulate(config, model_file, out)
                return code
    except (PassivityError, ValidationError, ValueError, OSError) as exc:
        logger.error("%s failed: %s", config.command, exc)
        _emit(
            {
                "status": "error",
                "command": config.command,
                "error_type": type(exc).__name__,
                "reason": str(exc),
            },
            config,
            out,
        )
        return EXIT_ERROR

    status = "ok" if code == EXIT_OK else "finding"
    report = build_report(config.command, {"status": status} | body, _resolved_config(config))
    _emit(report, config, out)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    try:
        config = parse_args(argv)
    except (UsageError, ValueError) as exc:
        _configure_logging(None)
        logger.error("usage: %s", exc)
        write_json({"status": "error", "error_type": "UsageError", "reason": str(exc)}, sys.stdout)
        return EXIT_ERROR
    _configure_logging(config.log_level)
    return run(config)


def entrypoint() -> None:
    raise SystemExit(main())
