from __future__ import annotations

import io
import json
from pathlib import Path

import numpy as np
import pytest

from src.cli.main import EXIT_ERROR, EXIT_FINDING, EXIT_OK, main, parse_args
from src.config import get_settings
from src.model_files import load_model

FIXTURES_DIR = Path(__file__).parent / "fixtures"
STRICT = str(FIXTURES_DIR / "rigid_body_strict.json")
VIOLATED = str(FIXTURES_DIR / "rigid_body_violated.json")
LOSSLESS = str(FIXTURES_DIR / "rigid_body_lossless.json")


def _run(argv: list[str], capsys: pytest.CaptureFixture[str]) -> tuple[int, str]:
    code = main(argv)
    return code, capsys.readouterr().out


def _run_json(
    argv: list[str], capsys: pytest.CaptureFixture[str]
) -> tuple[int, dict[str, object]]:
    code, out = _run(argv, capsys)
    return code, json.loads(out)


def test_check_strict_model_exits_zero(capsys: pytest.CaptureFixture[str]) -> None:
    code, payload = _run_json(["check", STRICT], capsys)

    assert code == EXIT_OK
    assert payload["status"] == "ok"
    assert payload["command"] == "check"
    report = payload["report"]
    assert report["verdict"] == "satisfied_strictly"
    assert report["epsilon"] == pytest.approx(0.5)
    assert payload["config"]["model_path"] == STRICT


def test_check_violated_model_exits_two(capsys: pytest.CaptureFixture[str]) -> None:
    code, payload = _run_json(["check", VIOLATED], capsys)

    assert code == EXIT_FINDING
    assert payload["status"] == "finding"
    assert payload["report"]["lambda_max"] == pytest.approx(1.0)


def test_check_general_reports_sampling(capsys: pytest.CaptureFixture[str]) -> None:
    code, payload = _run_json(
        ["check", STRICT, "--general", "--samples", "10", "--seed", "4", "--box=-1,1"],
        capsys,
    )

    assert code == EXIT_OK
    assert payload["report"]["samples_evaluated"] == 10
    assert payload["report"]["sample_info"].startswith("sampled, not a proof")


def test_gamma_with_gain_design(capsys: pytest.CaptureFixture[str]) -> None:
    code, payload = _run_json(["gamma", LOSSLESS, "--x-bar", "1,0,0", "--delta", "0.1"], capsys)

    assert code == EXIT_OK
    assert payload["report"]["gamma"] == pytest.approx(0.5, abs=1e-6)
    np.testing.assert_allclose(payload["K_P"], 0.6 * np.eye(3), atol=1e-6)


def test_margin_reports_global_branch(capsys: pytest.CaptureFixture[str]) -> None:
    code, payload = _run_json(["margin", STRICT], capsys)

    assert code == EXIT_OK
    assert payload["report"]["branch"] == "global_asymptotic"


def test_equilibrium_solves_for_given_input(capsys: pytest.CaptureFixture[str]) -> None:
    code, payload = _run_json(
        ["equilibrium", STRICT, "--u", "1,0,0", "--x0", "0.8,0.05,-0.05"], capsys
    )

    assert code == EXIT_OK
    np.testing.assert_allclose(payload["equilibrium"]["s_bar"], [1.0, 0.0, 0.0], atol=1e-8)


def test_validate_fixture(capsys: pytest.CaptureFixture[str]) -> None:
    code, payload = _run_json(["validate", STRICT, "--samples", "5"], capsys)

    assert code == EXIT_OK
    assert payload["validation"]["verdict"] == "pass"


def test_simulate_lossless_keeps_storage_constant(capsys: pytest.CaptureFixture[str]) -> None:
    code, out = _run(["simulate", LOSSLESS, "--x0", "1,1,1", "--t-end", "5"], capsys)

    assert code == EXIT_OK
    lines = out.splitlines()
    assert lines[0] == "t,x1,x2,x3,u1,u2,u3,y1,y2,y3,Hshift"
    rows = np.loadtxt(io.StringIO(out), delimiter=",", skiprows=1)
    storage = rows[:, -1]
    assert float(np.max(np.abs(storage - storage[0]))) <= 1e-8
    assert rows[-1, 0] == pytest.approx(5.0)


def test_simulate_batch_with_feedback_writes_report(
    capsys: pytest.CaptureFixture[str],
) -> None:
    code, payload = _run_json(
        [
            "simulate",
            LOSSLESS,
            "--x-bar",
            "1,0,0",
            "--kp",
            "0.6",
            "--u",
            "sin",
            "--amplitude",
            "0.2",
            "--batch",
            "3",
            "--box=-0.5,0.5",
            "--t-end",
            "1",
            "--h",
            "0.005",
        ],
        capsys,
    )

    assert code == EXIT_OK
    assert payload["runs"] == 3
    assert payload["dissipation"]["passed"] is True


def test_case_rigid_body_dumps_reloadable_model(
    tmp_path: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    model_path = tmp_path / "rigid_body.json"

    code, payload = _run_json(["case", "rigid-body", "--model-out", str(model_path)], capsys)

    assert code == EXIT_OK
    assert payload["single_axis_threshold"]["stable"] is True
    loaded = load_model(model_path)
    assert loaded.meta["case"] == "rigid-body"
    np.testing.assert_allclose(loaded.x_bar, [1.0, 0.0, 0.0], atol=1e-9)

    recheck, report = _run_json(["check", str(model_path)], capsys)
    assert recheck == EXIT_OK
    assert report["report"]["verdict"] == "satisfied_strictly"


def test_case_sync_gen_defaults_report_violation(capsys: pytest.CaptureFixture[str]) -> None:
    code, payload = _run_json(["case", "sync-gen"], capsys)

    assert code == EXIT_FINDING
    assert payload["report"]["verdict"] == "violated"
    assert payload["literature_discrepancies"]


def test_case_simulation_writes_trajectory(
    tmp_path: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    csv_path = tmp_path / "trajectory.csv"

    code, payload = _run_json(
        [
            "case",
            "rigid-body",
            "--simulate",
            "--x0",
            "1.5,0.5,-0.5",
            "--t-end",
            "2",
            "--h",
            "0.01",
            "--trajectory-out",
            str(csv_path),
        ],
        capsys,
    )

    assert code == EXIT_OK
    assert payload["simulation"]["dissipation"]["passed"] is True
    assert csv_path.read_text(encoding="utf-8").startswith("t,x1,x2,x3")


def test_output_flag_writes_report_to_file(
    tmp_path: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    report_path = tmp_path / "report.json"

    code, out = _run(["--output", str(report_path), "check", STRICT], capsys)

    assert code == EXIT_OK
    assert out == ""
    assert json.loads(report_path.read_text(encoding="utf-8"))["status"] == "ok"


def test_malformed_model_exits_one(capsys: pytest.CaptureFixture[str]) -> None:
    code, payload = _run_json(["check", str(FIXTURES_DIR / "bad_json.json")], capsys)

    assert code == EXIT_ERROR
    assert payload["status"] == "error"
    assert payload["error_type"] == "ModelFileError"
    assert "line 5 column 3" in payload["reason"]


def test_bad_shape_exits_one(capsys: pytest.CaptureFixture[str]) -> None:
    code, payload = _run_json(["gamma", str(FIXTURES_DIR / "bad_shape_G.json")], capsys)

    assert code == EXIT_ERROR
    assert payload["error_type"] == "ModelFileError"


def test_missing_equilibrium_exits_one(
    tmp_path: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    payload = json.loads(Path(LOSSLESS).read_text(encoding="utf-8"))
    del payload["x_bar"], payload["u_bar"]
    model_path = tmp_path / "no_equilibrium.json"
    model_path.write_text(json.dumps(payload), encoding="utf-8")

    code, error = _run_json(["gamma", str(model_path)], capsys)

    assert code == EXIT_ERROR
    assert error["error_type"] == "PreconditionError"
    assert "--x-bar" in error["reason"]


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["frobnicate"],
        ["check"],
        ["--psd-rel-tol", "0", "check", STRICT],
        ["simulate", LOSSLESS, "--h", "-1"],
        ["check", STRICT, "--box", "2,1"],
    ],
)
def test_usage_errors_exit_one(argv: list[str], capsys: pytest.CaptureFixture[str]) -> None:
    code, payload = _run_json(argv, capsys)

    assert code == EXIT_ERROR
    assert payload["error_type"] == "UsageError"


def test_tolerance_flag_applies_to_one_run_only(capsys: pytest.CaptureFixture[str]) -> None:
    _, scoped = _run_json(["--psd-rel-tol", "1e-3", "check", STRICT], capsys)
    _, plain = _run_json(["check", STRICT], capsys)

    assert scoped["config"]["tolerances"]["psd_rel_tol"] == 1e-3
    assert plain["config"]["tolerances"]["psd_rel_tol"] == 1e-9
    assert get_settings().psd_rel_tol == 1e-9


def test_report_config_records_defaults_in_effect(capsys: pytest.CaptureFixture[str]) -> None:
    _, payload = _run_json(["check", STRICT], capsys)

    config = payload["config"]
    assert config["h"] == 1e-3
    assert config["t_end"] == 20.0
    assert config["n_samples"] == 100
    assert config["sample_box"] == [-5.0, 5.0]
    assert config["seed"] == 0


def test_parse_args_maps_flags_to_config() -> None:
    config = parse_args(
        ["--psd-rel-tol", "1e-6", "margin", STRICT, "--mode", "global_sampled", "--samples", "7"]
    )

    assert config.command == "margin"
    assert config.model_path == Path(STRICT)
    assert config.mode == "global_sampled"
    assert config.n_samples == 7
    assert config.tolerances == (("psd_rel_tol", 1e-6),)
