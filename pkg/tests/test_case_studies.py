from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from src.case_studies.base import default_params_path, load_params
from src.case_studies.rigid_body import (
    RigidBodyParams,
    build_rigid_body,
    momentum_of,
    rigid_body_condition_matrix,
    rigid_body_reference_matrix,
    run_rigid_body_case,
    single_axis_threshold,
)
from src.case_studies.sync_gen import (
    SyncGenParams,
    build_sync_gen,
    condition_discrepancies,
    run_sync_gen_case,
    sync_gen_coenergy_rhs,
    sync_gen_condition_matrix,
    sync_gen_reference_matrix,
)
from src.models.errors import ModelFileError, PreconditionError
from src.models.report import Verdict
from src.services.analyzer_service import check_affine
from src.services.ph_service import dynamics


@pytest.fixture
def generator() -> SyncGenParams:
    return load_params(SyncGenParams, default_params_path("sync_gen"))


def _random_generator(rng: np.random.Generator) -> SyncGenParams:
    """Draw parameters whose d-axis inductance block is diagonally dominant."""

    return SyncGenParams(
        L_d=rng.uniform(2.0, 4.0),
        L_q=rng.uniform(1.0, 4.0),
        L_afd=rng.uniform(0.1, 0.8),
        L_akd=rng.uniform(0.1, 0.8),
        L_akq=rng.uniform(0.1, 0.8),
        L_ffd=rng.uniform(2.0, 4.0),
        L_kkd=rng.uniform(2.0, 4.0),
        L_kkq=rng.uniform(2.0, 4.0),
        k=rng.uniform(0.5, 1.2),
        r=rng.uniform(0.1, 1.0),
        R_f=rng.uniform(0.05, 1.0),
        R_kd=rng.uniform(0.05, 1.0),
        R_kq=rng.uniform(0.05, 1.0),
        d=rng.uniform(0.1, 1.0),
        m=rng.uniform(0.5, 5.0),
        V_f=rng.uniform(0.0, 1.0),
        tau=rng.uniform(0.0, 1.0),
    )


def _random_body(rng: np.random.Generator) -> RigidBodyParams:
    return RigidBodyParams(
        m_x=rng.uniform(0.5, 5.0),
        m_y=rng.uniform(0.5, 5.0),
        m_z=rng.uniform(0.5, 5.0),
        r_x=rng.uniform(0.1, 2.0),
        r_y=rng.uniform(0.1, 2.0),
        r_z=rng.uniform(0.1, 2.0),
        d_x=rng.uniform(-3.0, 3.0),
    )


def test_rigid_body_b_path_matches_closed_form(rng: np.random.Generator) -> None:
    for _ in range(100):
        params = _random_body(rng)
        omega_bar = rng.uniform(-5.0, 5.0, size=3)

        derived = rigid_body_condition_matrix(params, omega_bar)
        closed_form = rigid_body_reference_matrix(params, omega_bar)

        scale = 1.0 + float(np.max(np.abs(closed_form)))
        assert float(np.max(np.abs(derived - closed_form))) <= 1e-10 * scale


def test_sync_gen_b_path_matches_closed_form(rng: np.random.Generator) -> None:
    for _ in range(100):
        params = _random_generator(rng)
        s_bar = rng.uniform(-5.0, 5.0, size=6)

        derived = sync_gen_condition_matrix(params, s_bar)
        closed_form = sync_gen_reference_matrix(params, s_bar)

        scale = 1.0 + float(np.max(np.abs(closed_form)))
        assert float(np.max(np.abs(derived - closed_form))) <= 1e-10 * scale


def test_single_axis_threshold_predicts_verdict(rng: np.random.Generator) -> None:
    compared = 0
    for _ in range(1000):
        params = _random_body(rng)
        omega_bar = np.array([params.d_x / params.r_x, 0.0, 0.0])

        report = check_affine(build_rigid_body(params), momentum_of(params, omega_bar))
        if abs(report.lambda_max) <= 10.0 * report.psd_tol:
            continue

        compared += 1
        expected = single_axis_threshold(params).stable
        assert (report.verdict is Verdict.SATISFIED_STRICTLY) == expected
    assert compared > 900


def test_single_axis_threshold_preconditions() -> None:
    with pytest.raises(PreconditionError, match="d_y = d_z = 0"):
        _ = single_axis_threshold(RigidBodyParams(m_x=1.0, m_y=2.0, m_z=3.0, d_y=0.5))
    with pytest.raises(PreconditionError, match="positive gains"):
        _ = single_axis_threshold(RigidBodyParams(m_x=1.0, m_y=2.0, m_z=3.0, r_z=0.0))


def test_rigid_body_case_on_default_parameters() -> None:
    params = load_params(RigidBodyParams, default_params_path("rigid_body"))

    result = run_rigid_body_case(params)

    np.testing.assert_allclose(result.equilibrium.s_bar, [1.0, 0.0, 0.0], atol=1e-9)
    assert result.report.verdict is Verdict.SATISFIED_STRICTLY
    assert result.report.epsilon == pytest.approx(0.5, abs=1e-9)
    assert result.extras["single_axis_threshold"] == {"lhs": 1.0, "rhs": 0.25, "stable": True}
    payload = result.to_dict()
    assert payload["case"] == "rigid-body"
    assert payload["report"]["verdict"] == "satisfied_strictly"


def test_rigid_body_case_with_pinned_spin() -> None:
    params = RigidBodyParams(m_x=1.0, m_y=2.0, m_z=3.0, omega_bar=(3.0, 0.0, 0.0))

    result = run_rigid_body_case(params)

    np.testing.assert_allclose(result.equilibrium.u_bar, [3.0, 0.0, 0.0], atol=1e-12)
    assert result.report.verdict is Verdict.VIOLATED
    assert "single_axis_threshold" not in result.extras


def test_sync_gen_coenergy_form_matches_state_dynamics(
    generator: SyncGenParams, rng: np.random.Generator
) -> None:
    model = build_sync_gen(generator)
    for _ in range(20):
        x = rng.uniform(-3.0, 3.0, size=6)
        u = rng.uniform(-1.0, 1.0, size=2)

        expected = dynamics(model, x, u)
        np.testing.assert_allclose(
            sync_gen_coenergy_rhs(generator, model.Q @ x, u), expected, atol=1e-10
        )


def test_sync_gen_structure(generator: SyncGenParams, rng: np.random.Generator) -> None:
    model = build_sync_gen(generator)

    np.testing.assert_allclose(model.F0 + model.F0.T, -2.0 * np.diag(generator.damping))
    for _ in range(10):
        J = model.interconnection(rng.normal(size=6))
        np.testing.assert_allclose(J, -J.T, atol=1e-15)
    np.testing.assert_allclose(model.Q @ model.Q_inv, np.eye(6), atol=1e-12)


def test_printed_matrix_differs_in_last_column(generator: SyncGenParams) -> None:
    s_bar = np.array([1.0, 2.0, 0.5, 0.0, 0.0, 1.0])

    unit_coupling = condition_discrepancies(generator, s_bar)
    scaled = condition_discrepancies(generator.model_copy(update={"k": 1.2}), s_bar)

    assert [(item.row, item.col) for item in unit_coupling] == [(2, 6)]
    assert unit_coupling[0].derived == pytest.approx(1.0 * generator.L_q)
    assert unit_coupling[0].literature == pytest.approx(1.0 * generator.L_d)
    assert [(item.row, item.col) for item in scaled] == [(2, 6), (3, 6), (4, 6), (5, 6)]


def test_sync_gen_case_on_default_parameters(generator: SyncGenParams) -> None:
    result = run_sync_gen_case(generator)

    s_bar = result.equilibrium.s_bar
    assert result.equilibrium.residual_norm <= 1e-8
    np.testing.assert_allclose(
        result.condition_matrix, sync_gen_reference_matrix(generator, s_bar), atol=1e-10
    )
    assert result.report.verdict is Verdict.VIOLATED
    assert result.extras["state_labels"][5] == "p"
    first = result.extras["literature_discrepancies"][0]
    assert (first["row"], first["col"]) == (2, 6)


def test_sync_gen_rejects_indefinite_inductances(generator: SyncGenParams) -> None:
    payload = generator.model_dump() | {"L_afd": 3.0}

    with pytest.raises(ValidationError, match="positive definite"):
        _ = SyncGenParams.model_validate(payload)


def test_rigid_body_rejects_pinned_spin_with_disturbance() -> None:
    with pytest.raises(ValidationError, match="not both"):
        _ = RigidBodyParams(m_x=1.0, m_y=2.0, m_z=3.0, d_x=1.0, omega_bar=(1.0, 0.0, 0.0))


def test_parameter_file_errors_name_the_field(tmp_path: Path) -> None:
    path = tmp_path / "body.json"
    path.write_text(json.dumps({"m_x": 1.0, "m_y": -2.0, "m_z": 3.0}), encoding="utf-8")

    with pytest.raises(ModelFileError, match="field m_y"):
        _ = load_params(RigidBodyParams, path)


def test_parameter_file_rejects_unknown_fields(tmp_path: Path) -> None:
    path = tmp_path / "body.json"
    path.write_text(
        json.dumps({"m_x": 1.0, "m_y": 2.0, "m_z": 3.0, "mass": 1.0}), encoding="utf-8"
    )

    with pytest.raises(ModelFileError, match="field mass"):
        _ = load_params(RigidBodyParams, path)


def test_parameter_file_reports_json_position(tmp_path: Path) -> None:
    path = tmp_path / "body.json"
    path.write_text('{\n  "m_x": 1.0\n  "m_y": 2.0\n}\n', encoding="utf-8")

    with pytest.raises(ModelFileError, match="line 3 column 3"):
        _ = load_params(RigidBodyParams, path)
