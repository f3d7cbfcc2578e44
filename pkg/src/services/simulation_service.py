"""Fixed-step RK4 simulation and numerical dissipation checks."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from typing import TypeAlias

import numpy as np
from numpy.typing import ArrayLike, NDArray

from src.config import current_settings
from src.models.errors import DivergenceError
from src.models.ph_model import (
    EquilibriumPoint,
    Matrix,
    ModelLike,
    QuadraticAffinePH,
    Vector,
    as_matrix,
    as_ph_model,
    as_vector,
    psd_tolerance,
)
from src.models.trajectory import DissipationReport, Trajectory

logger = logging.getLogger(__name__)

InputSignal: TypeAlias = Callable[[float], ArrayLike]
VectorField: TypeAlias = Callable[[float, NDArray[np.float64]], NDArray[np.float64]]


def constant_input(u: ArrayLike) -> InputSignal:
    value = np.asarray(u, dtype=np.float64)
    return lambda _t: value


def sinusoidal_input(
    u_bar: ArrayLike, amplitude: float, frequency: float = 1.0
) -> InputSignal:
    """u(t) = u_bar + amplitude * sin(frequency * t) in every channel."""

    base = np.asarray(u_bar, dtype=np.float64)
    return lambda t: base + amplitude * math.sin(frequency * t)


def tabulated_input(times: ArrayLike, values: ArrayLike) -> InputSignal:
    """Piecewise-linear input through samples (held constant outside the table)."""

    grid = np.asarray(times, dtype=np.float64)
    table = np.asarray(values, dtype=np.float64)
    if table.ndim == 1:
        table = table[:, None]
    if grid.ndim != 1 or grid.shape[0] != table.shape[0] or grid.shape[0] < 1:
        raise ValueError("input table needs one row per time sample")
    if grid.shape[0] > 1 and not bool(np.all(np.diff(grid) > 0)):
        raise ValueError("input table times must be strictly increasing")

    def signal(t: float) -> Vector:
        return np.array(
            [np.interp(t, grid, table[:, channel]) for channel in range(table.shape[1])]
        )

    return signal


def convergence_horizon(epsilon: float) -> float:
    """Heuristic horizon 20 / epsilon for convergence checks."""

    if not epsilon > 0:
        raise ValueError("epsilon must be positive for a convergence horizon")
    return 20.0 / epsilon


def _step_grid(t_end: float, h: float) -> Vector:
    """Time nodes 0, h, 2h, ... ending exactly on t_end (last step may be shorter)."""

    ratio = t_end / h
    full = round(ratio)
    if full >= 1 and abs(ratio - full) <= 1e-9 * ratio:
        grid = h * np.arange(full + 1, dtype=np.float64)
    else:
        full = math.floor(ratio)
        grid = np.append(h * np.arange(full + 1, dtype=np.float64), t_end)
    grid[-1] = t_end
    return grid


def _rk4(
    field: VectorField, x0: NDArray[np.float64], t_end: float, h: float, stride: int
) -> tuple[Vector, NDArray[np.float64]]:
    if not h > 0:
        raise ValueError("step h must be positive")
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    if stride < 1:
        raise ValueError("stride must be >= 1")

    grid = _step_grid(t_end, h)
    steps = grid.shape[0] - 1
    if steps > 1 and grid[-1] - grid[-2] < h * (1.0 - 1e-9):
        logger.debug("final RK4 step shortened to %.3e to land on t_end", grid[-1] - grid[-2])
    times = [0.0]
    states = [x0.copy()]
    x = x0.copy()
    for k in range(steps):
        t, t_next = float(grid[k]), float(grid[k + 1])
        dt = t_next - t
        k1 = field(t, x)
        k2 = field(t + 0.5 * dt, x + 0.5 * dt * k1)
        k3 = field(t + 0.5 * dt, x + 0.5 * dt * k2)
        k4 = field(t_next, x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not bool(np.all(np.isfinite(x))):
            raise DivergenceError("non-finite state encountered", time=t_next)
        if (k + 1) % stride == 0 or k + 1 == steps:
            times.append(t_next)
            states.append(x)
    return np.asarray(times), np.asarray(states)


def _outputs_and_storage(
    model: ModelLike, states: NDArray[np.float64], x_ref: Vector
) -> tuple[NDArray[np.float64], Vector]:
    if isinstance(model, QuadraticAffinePH):
        coenergies = states @ model.Q
        delta = states - x_ref
        storage = 0.5 * np.einsum("ka,ab,kb->k", delta, model.Q, delta)
        return coenergies @ model.G, storage

    ph = as_ph_model(model)
    H_ref = ph.H(x_ref)
    grad_ref = ph.grad_H(x_ref)
    outputs = np.array([ph.G.T @ ph.grad_H(x) for x in states])
    storage = np.array([ph.H(x) - (x - x_ref) @ grad_ref - H_ref for x in states])
    return outputs, storage


def _single_field(model: ModelLike) -> Callable[[Vector, Vector], Vector]:
    """Return (x, u) -> x' without per-call validation."""

    if isinstance(model, QuadraticAffinePH):
        Q, G = model.Q, model.G
        return lambda x, u: model.state_matrix(x) @ (Q @ x) + G @ u
    return lambda x, u: model.F(x) @ model.grad_H(x) + model.G @ u


def _batch_field(
    sys: QuadraticAffinePH,
) -> Callable[[NDArray[np.float64], NDArray[np.float64]], NDArray[np.float64]]:
    """Vectorized (X, U) -> X' over a batch of states, shapes (B, n) and (B, m)."""

    F0_T, F_stack, Q, G_T = sys.F0.T, sys.F_stack, sys.Q, sys.G.T

    def field(X: NDArray[np.float64], U: NDArray[np.float64]) -> NDArray[np.float64]:
        S = X @ Q
        return S @ F0_T + np.einsum("bi,iac,bc->ba", X, F_stack, S) + U @ G_T

    return field


def _resolve_reference(model: ModelLike, x_ref: ArrayLike | None) -> Vector:
    if x_ref is None:
        return np.zeros(model.dim_state)
    return as_vector(x_ref, model.dim_state, "x_ref")


def integrate(
    model: ModelLike,
    u_of_t: InputSignal,
    x0: ArrayLike,
    t_end: float,
    h: float | None = None,
    *,
    x_ref: ArrayLike | None = None,
    stride: int = 1,
) -> Trajectory:
    """Classic RK4 on x' = (J - R) grad H + G u(t); storage is relative to ``x_ref``."""

    step = current_settings().default_step if h is None else h
    m = model.dim_input
    x_start = as_vector(x0, model.dim_state, "x0")
    reference = _resolve_reference(model, x_ref)
    flow = _single_field(model)

    def field(t: float, x: NDArray[np.float64]) -> NDArray[np.float64]:
        return flow(x, as_vector(u_of_t(t), m, "u(t)"))

    times, states = _rk4(field, x_start, t_end, step, stride)
    inputs = np.array([as_vector(u_of_t(float(t)), m, "u(t)") for t in times])
    outputs, storage = _outputs_and_storage(model, states, reference)
    return Trajectory(
        times=times,
        states=states,
        inputs=inputs,
        outputs=outputs,
        shifted_H=storage,
        x_ref=reference,
    )


def _check_gain(K_P: ArrayLike, m: int) -> Matrix:
    gain = as_matrix(K_P, (m, m), "K_P")
    tol = psd_tolerance(gain)
    if float(np.linalg.norm(gain - gain.T)) > tol:
        raise ValueError("K_P must be symmetric")
    if float(np.linalg.eigvalsh(0.5 * (gain + gain.T))[0]) < -tol:
        raise ValueError("K_P must be positive semidefinite")
    return gain


def closed_loop(
    model: ModelLike,
    eqpt: EquilibriumPoint,
    K_P: ArrayLike,
    v_of_t: InputSignal,
    x0: ArrayLike,
    t_end: float,
    h: float | None = None,
    *,
    stride: int = 1,
) -> Trajectory:
    """Integrate under u = u_bar - K_P (y - y_bar) + v(t).

    The returned ``inputs`` are u_bar + v(t), so ``verify_dissipation`` checks the
    port from v to y - y_bar.
    """

    step = current_settings().default_step if h is None else h
    m = model.dim_input
    gain = _check_gain(K_P, m)
    x_start = as_vector(x0, model.dim_state, "x0")
    ph = as_ph_model(model)
    flow = _single_field(model)

    def plant_input(t: float, x: Vector) -> Vector:
        y = ph.G.T @ ph.grad_H(x)
        return eqpt.u_bar - gain @ (y - eqpt.y_bar) + as_vector(v_of_t(t), m, "v(t)")

    def field(t: float, x: NDArray[np.float64]) -> NDArray[np.float64]:
        return flow(x, plant_input(t, x))

    times, states = _rk4(field, x_start, t_end, step, stride)
    external = np.array(
        [eqpt.u_bar + as_vector(v_of_t(float(t)), m, "v(t)") for t in times]
    )
    applied = np.array([plant_input(float(t), x) for t, x in zip(times, states)])
    outputs, storage = _outputs_and_storage(model, states, eqpt.x_bar)
    return Trajectory(
        times=times,
        states=states,
        inputs=external,
        outputs=outputs,
        shifted_H=storage,
        x_ref=eqpt.x_bar,
        plant_inputs=applied,
    )


def integrate_batch(
    model: ModelLike,
    u_of_t: InputSignal,
    x0s: ArrayLike,
    t_end: float,
    h: float | None = None,
    *,
    x_ref: ArrayLike | None = None,
    stride: int = 1,
    feedback: tuple[EquilibriumPoint, ArrayLike] | None = None,
) -> list[Trajectory]:
    """Integrate many initial states on the same grid.

    Quadratic-affine systems are advanced together as one (B, n) array; other
    models fall back to one ``integrate``/``closed_loop`` call per state. With
    ``feedback=(eqpt, K_P)`` the signal is v(t) and the loop of ``closed_loop``
    is closed around every member.
    """

    starts = np.atleast_2d(np.asarray(x0s, dtype=np.float64))
    n, m = model.dim_state, model.dim_input
    if starts.shape[1] != n:
        raise ValueError(f"x0s must have shape (B, {n})")
    step = current_settings().default_step if h is None else h

    if not isinstance(model, QuadraticAffinePH):
        if feedback is None:
            return [
                integrate(model, u_of_t, x0, t_end, step, x_ref=x_ref, stride=stride)
                for x0 in starts
            ]
        eqpt, K_P = feedback
        return [
            closed_loop(model, eqpt, K_P, u_of_t, x0, t_end, step, stride=stride)
            for x0 in starts
        ]

    flow = _batch_field(model)
    G = model.G
    if feedback is None:
        reference = _resolve_reference(model, x_ref)
        u_bar = np.zeros(m)
        y_bar = np.zeros(m)
        gain = np.zeros((m, m))
    else:
        eqpt, K_P = feedback
        reference = eqpt.x_bar
        u_bar, y_bar = eqpt.u_bar, eqpt.y_bar
        gain = _check_gain(K_P, m)
    closed = feedback is not None

    def plant_inputs(t: float, X: NDArray[np.float64]) -> NDArray[np.float64]:
        signal = as_vector(u_of_t(t), m, "u(t)")
        if not closed:
            return np.broadcast_to(signal, (X.shape[0], m))
        Y = X @ model.Q @ G
        return u_bar + signal - (Y - y_bar) @ gain.T

    def field(t: float, X: NDArray[np.float64]) -> NDArray[np.float64]:
        return flow(X, plant_inputs(t, X))

    times, states = _rk4(field, starts, t_end, step, stride)
    signals = np.array([as_vector(u_of_t(float(t)), m, "u(t)") for t in times])
    external = u_bar + signals if closed else signals

    trajectories: list[Trajectory] = []
    for member in range(starts.shape[0]):
        member_states = states[:, member, :]
        outputs, storage = _outputs_and_storage(model, member_states, reference)
        applied = (
            np.array(
                [plant_inputs(float(t), x[None, :])[0] for t, x in zip(times, member_states)]
            )
            if closed
            else None
        )
        trajectories.append(
            Trajectory(
                times=times,
                states=member_states,
                inputs=external,
                outputs=outputs,
                shifted_H=storage,
                x_ref=reference,
                plant_inputs=applied,
            )
        )
    return trajectories


def verify_dissipation(
    traj: Trajectory, eqpt: EquilibriumPoint, gamma: float | None = None
) -> DissipationReport:
    """Check H(x_{k+1}) - H(x_k) <= trapezoid of (u-u_bar)^T(y-y_bar) + gamma ||y-y_bar||^2.

    A violation is reported, not raised.
    """

    scale = 1e-12 * (1.0 + float(np.linalg.norm(eqpt.x_bar)))
    if not np.allclose(traj.x_ref, eqpt.x_bar, rtol=0.0, atol=scale):
        raise ValueError("trajectory storage is not referenced to this equilibrium")

    weight = 0.0 if gamma is None else gamma
    du = traj.inputs - eqpt.u_bar
    dy = traj.outputs - eqpt.y_bar
    supply_rate = np.einsum("ka,ka->k", du, dy) + weight * np.einsum("ka,ka->k", dy, dy)
    supplied = 0.5 * np.diff(traj.times) * (supply_rate[:-1] + supply_rate[1:])
    stored = np.diff(traj.shifted_H)
    tolerance = current_settings().dissipation_rel_tol * (
        1.0 + float(np.max(traj.shifted_H))
    )

    if stored.size == 0:
        return DissipationReport(True, 0.0, float(traj.times[0]), tolerance, weight, 0)

    excess = stored - supplied
    worst = int(np.argmax(excess))
    report = DissipationReport(
        passed=bool(excess[worst] <= tolerance),
        worst_violation=float(excess[worst]),
        worst_time=float(traj.times[worst + 1]),
        tolerance=tolerance,
        gamma=weight,
        steps=int(stored.size),
    )
    if not report.passed:
        logger.warning(
            "Dissipation inequality violated by %.3e at t=%.6g (tolerance %.3e)",
            report.worst_violation,
            report.worst_time,
            tolerance,
        )
    return report
