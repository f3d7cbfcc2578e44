from __future__ import annotations

import math

import numpy as np
import pytest

from src.case_studies.rigid_body import RigidBodyParams, build_rigid_body
from src.models.errors import DivergenceError
from src.models.ph_model import QuadraticAffinePH
from src.services.equilibrium_service import equilibrium_from_state
from src.services.simulation_service import (
    closed_loop,
    constant_input,
    convergence_horizon,
    integrate,
    integrate_batch,
    sinusoidal_input,
    tabulated_input,
    verify_dissipation,
)


def _state_offset(params: RigidBodyParams, coenergy_direction: np.ndarray) -> np.ndarray:
    return params.inertia * coenergy_direction


def test_lossless_body_conserves_energy(free_body: RigidBodyParams) -> None:
    model = build_rigid_body(free_body)

    traj = integrate(model, constant_input(np.zeros(3)), [1.0, 1.0, 1.0], 10.0, 1e-3)

    assert float(np.max(np.abs(traj.shifted_H - traj.shifted_H[0]))) <= 1e-8
    assert traj.times[-1] == pytest.approx(10.0)
    assert traj.states.shape == (10_001, 3)


def test_rk4_error_shrinks_with_fourth_order(controlled_body: RigidBodyParams) -> None:
    model = build_rigid_body(controlled_body)
    signal = constant_input(controlled_body.disturbance)
    x0 = [3.0, 4.0, 5.0]

    reference = integrate(model, signal, x0, 10.0, 1e-3).final_state
    coarse = integrate(model, signal, x0, 10.0, 2e-2).final_state
    fine = integrate(model, signal, x0, 10.0, 1e-2).final_state

    ratio = np.linalg.norm(coarse - reference) / np.linalg.norm(fine - reference)
    assert 12.0 <= ratio <= 20.0


def test_lossless_energy_drift_shrinks_with_step(free_body: RigidBodyParams) -> None:
    model = build_rigid_body(free_body)
    signal = constant_input(np.zeros(3))
    drifts = []
    for h in (4e-3, 2e-3, 1e-3, 5e-4):
        traj = integrate(model, signal, [20.0, 20.0, 20.0], 10.0, h)
        drifts.append(float(np.max(np.abs(traj.shifted_H - traj.shifted_H[0]))))

    ratios = [coarse / fine for coarse, fine in zip(drifts, drifts[1:])]
    assert all(ratio >= 12.0 for ratio in ratios), ratios


def _scalar_decay() -> QuadraticAffinePH:
    return QuadraticAffinePH(
        F0=-np.eye(1), F_list=(np.zeros((1, 1)),), Q=np.eye(1), R0=np.eye(1), G=np.eye(1)
    )


def test_horizon_is_kept_when_step_does_not_divide_it() -> None:
    model = _scalar_decay()
    signal = constant_input(np.zeros(1))

    traj = integrate(model, signal, [1.0], 1.0, 0.4)

    assert traj.times[-1] == 1.0
    np.testing.assert_allclose(traj.times, [0.0, 0.4, 0.8, 1.0], atol=1e-15)
    assert traj.final_state[0] == pytest.approx(math.exp(-1.0), abs=1e-3)


def test_batch_and_closed_loop_keep_the_horizon() -> None:
    model = _scalar_decay()
    eqpt = equilibrium_from_state(model, [0.0])
    signal = constant_input(np.zeros(1))

    batch = integrate_batch(model, signal, [[1.0], [-0.5]], 1.0, 0.4)
    looped = closed_loop(model, eqpt, 0.5 * np.eye(1), signal, [1.0], 1.0, 0.4)

    assert [traj.times[-1] for traj in batch] == [1.0, 1.0]
    assert looped.times[-1] == 1.0
    assert looped.final_state[0] == pytest.approx(math.exp(-1.5), abs=1e-3)


def test_stride_keeps_final_sample(controlled_body: RigidBodyParams) -> None:
    traj = integrate(
        build_rigid_body(controlled_body),
        constant_input(controlled_body.disturbance),
        np.zeros(3),
        1.0,
        0.03,
        stride=10,
    )

    assert traj.times[-1] == 1.0
    np.testing.assert_allclose(traj.times, [0.0, 0.3, 0.6, 0.9, 1.0], atol=1e-12)


@pytest.mark.slow
@pytest.mark.parametrize("amplitude", [0.0, 0.1])
def test_strict_equilibrium_dissipates_along_random_runs(
    controlled_body: RigidBodyParams, rng: np.random.Generator, amplitude: float
) -> None:
    model = build_rigid_body(controlled_body)
    eqpt = equilibrium_from_state(model, [1.0, 0.0, 0.0])
    starts = rng.uniform(-2.0, 2.0, size=(100, 3))
    signal = sinusoidal_input(eqpt.u_bar, amplitude)

    trajectories = integrate_batch(model, signal, starts, 20.0, 1e-3, x_ref=eqpt.x_bar)

    for traj in trajectories:
        report = verify_dissipation(traj, eqpt)
        assert report.passed, report.to_dict()


@pytest.mark.slow
def test_strict_equilibrium_attracts_trajectories(
    controlled_body: RigidBodyParams, rng: np.random.Generator
) -> None:
    model = build_rigid_body(controlled_body)
    eqpt = equilibrium_from_state(model, [1.0, 0.0, 0.0])
    t_end = convergence_horizon(0.5)
    starts = rng.uniform(-2.0, 2.0, size=(100, 3))

    trajectories = integrate_batch(
        model, constant_input(eqpt.u_bar), starts, t_end, 1e-3, x_ref=eqpt.x_bar
    )

    assert t_end == pytest.approx(40.0)
    for traj in trajectories:
        assert float(np.linalg.norm(traj.final_state - eqpt.x_bar)) <= 1e-4


def test_violated_equilibrium_gains_storage(controlled_body: RigidBodyParams) -> None:
    model = build_rigid_body(controlled_body)
    eqpt = equilibrium_from_state(model, [3.0, 0.0, 0.0])
    direction = np.array([0.0, 1.0, 1.0]) / math.sqrt(2.0)
    x0 = eqpt.x_bar + _state_offset(controlled_body, 0.1 * direction)

    traj = integrate(model, constant_input(eqpt.u_bar), x0, 1.0, 1e-2, x_ref=eqpt.x_bar)
    report = verify_dissipation(traj, eqpt)

    assert not report.passed
    assert report.worst_violation > report.tolerance
    assert traj.shifted_H[-1] > traj.shifted_H[0]


def test_shortage_weight_restores_dissipation(free_body: RigidBodyParams) -> None:
    model = build_rigid_body(free_body)
    eqpt = equilibrium_from_state(model, [1.0, 0.0, 0.0])
    x0 = eqpt.x_bar + _state_offset(free_body, 0.1 * np.array([0.2, 1.0, 0.9]))

    traj = integrate(model, constant_input(eqpt.u_bar), x0, 2.0, 1e-3, x_ref=eqpt.x_bar)

    assert not verify_dissipation(traj, eqpt).passed
    weighted = verify_dissipation(traj, eqpt, gamma=0.5)
    assert weighted.passed
    assert weighted.gamma == 0.5


def test_feedback_passifies_lossless_body(free_body: RigidBodyParams) -> None:
    model = build_rigid_body(free_body)
    eqpt = equilibrium_from_state(model, [1.0, 0.0, 0.0])
    x0 = eqpt.x_bar + _state_offset(free_body, 0.1 * np.array([0.2, 1.0, 0.9]))
    v = sinusoidal_input(np.zeros(3), 0.2)

    traj = closed_loop(model, eqpt, 0.6 * np.eye(3), v, x0, 2.0, 1e-3)

    assert verify_dissipation(traj, eqpt).passed
    assert traj.plant_inputs is not None
    np.testing.assert_allclose(traj.inputs[0], eqpt.u_bar)
    np.testing.assert_allclose(
        traj.plant_inputs[0], eqpt.u_bar - 0.6 * (traj.outputs[0] - eqpt.y_bar)
    )


@pytest.mark.slow
def test_feedback_passifies_lossless_body_on_random_runs(
    free_body: RigidBodyParams, rng: np.random.Generator
) -> None:
    model = build_rigid_body(free_body)
    eqpt = equilibrium_from_state(model, [1.0, 0.0, 0.0])
    starts = eqpt.x_bar + rng.uniform(-1.0, 1.0, size=(100, 3))

    trajectories = integrate_batch(
        model,
        sinusoidal_input(np.zeros(3), 0.1),
        starts,
        5.0,
        1e-3,
        feedback=(eqpt, 0.6 * np.eye(3)),
    )

    for traj in trajectories:
        report = verify_dissipation(traj, eqpt)
        assert report.passed, report.to_dict()


def test_zero_gain_closed_loop_matches_open_loop(controlled_body: RigidBodyParams) -> None:
    model = build_rigid_body(controlled_body)
    eqpt = equilibrium_from_state(model, [1.0, 0.0, 0.0])
    x0 = [0.5, -1.0, 2.0]

    looped = closed_loop(
        model, eqpt, np.zeros((3, 3)), constant_input(np.zeros(3)), x0, 2.0, 1e-2
    )
    open_loop = integrate(
        model, constant_input(eqpt.u_bar), x0, 2.0, 1e-2, x_ref=eqpt.x_bar
    )

    np.testing.assert_allclose(looped.states, open_loop.states, atol=1e-12)
    np.testing.assert_allclose(looped.shifted_H, open_loop.shifted_H, atol=1e-12)


def test_closed_loop_rejects_indefinite_gain(controlled_body: RigidBodyParams) -> None:
    model = build_rigid_body(controlled_body)
    eqpt = equilibrium_from_state(model, [1.0, 0.0, 0.0])

    with pytest.raises(ValueError, match="positive semidefinite"):
        _ = closed_loop(
            model, eqpt, -np.eye(3), constant_input(np.zeros(3)), eqpt.x_bar, 1.0
        )


def test_batch_matches_single_runs(
    controlled_body: RigidBodyParams, rng: np.random.Generator
) -> None:
    model = build_rigid_body(controlled_body)
    eqpt = equilibrium_from_state(model, [1.0, 0.0, 0.0])
    starts = rng.uniform(-2.0, 2.0, size=(4, 3))
    signal = sinusoidal_input(eqpt.u_bar, 0.3)

    batch = integrate_batch(model, signal, starts, 1.0, 1e-2, x_ref=eqpt.x_bar)
    looped = integrate_batch(
        model,
        sinusoidal_input(np.zeros(3), 0.3),
        starts,
        1.0,
        1e-2,
        feedback=(eqpt, 0.5 * np.eye(3)),
    )

    for x0, traj, closed in zip(starts, batch, looped):
        single = integrate(model, signal, x0, 1.0, 1e-2, x_ref=eqpt.x_bar)
        np.testing.assert_allclose(traj.states, single.states, atol=1e-10)
        np.testing.assert_allclose(traj.outputs, single.outputs, atol=1e-10)
        reference = closed_loop(
            model, eqpt, 0.5 * np.eye(3), sinusoidal_input(np.zeros(3), 0.3), x0, 1.0, 1e-2
        )
        np.testing.assert_allclose(closed.states, reference.states, atol=1e-10)
        np.testing.assert_allclose(closed.inputs, reference.inputs, atol=1e-12)


def test_non_finite_state_raises_divergence(free_body: RigidBodyParams) -> None:
    model = build_rigid_body(free_body)

    with pytest.raises(DivergenceError) as exc_info:
        _ = integrate(model, constant_input(np.zeros(3)), [1e160, 2e160, 3e159], 1.0, 0.1)

    assert exc_info.value.time == pytest.approx(0.1)


def test_storage_reference_must_match_equilibrium(controlled_body: RigidBodyParams) -> None:
    model = build_rigid_body(controlled_body)
    eqpt = equilibrium_from_state(model, [1.0, 0.0, 0.0])
    traj = integrate(model, constant_input(eqpt.u_bar), eqpt.x_bar, 0.1, 1e-2)

    with pytest.raises(ValueError, match="not referenced"):
        _ = verify_dissipation(traj, eqpt)


@pytest.mark.parametrize(("h", "t_end"), [(0.0, 1.0), (-1e-3, 1.0), (1e-3, 0.0)])
def test_integrate_rejects_bad_grid(
    controlled_body: RigidBodyParams, h: float, t_end: float
) -> None:
    with pytest.raises(ValueError, match="must be positive"):
        _ = integrate(
            build_rigid_body(controlled_body), constant_input(np.zeros(3)), np.zeros(3), t_end, h
        )


def test_tabulated_input_interpolates_and_holds() -> None:
    signal = tabulated_input([0.0, 1.0, 2.0], [[0.0, 1.0], [2.0, 1.0], [2.0, 3.0]])

    np.testing.assert_allclose(signal(0.5), [1.0, 1.0])
    np.testing.assert_allclose(signal(1.5), [2.0, 2.0])
    np.testing.assert_allclose(signal(5.0), [2.0, 3.0])


def test_tabulated_input_requires_increasing_times() -> None:
    with pytest.raises(ValueError, match="strictly increasing"):
        _ = tabulated_input([0.0, 0.0], [1.0, 2.0])


def test_convergence_horizon_needs_positive_margin() -> None:
    with pytest.raises(ValueError):
        _ = convergence_horizon(0.0)
