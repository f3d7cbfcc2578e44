"""MCP tools for condition checks on quadratic-affine models."""

import math

from mcp.server.fastmcp import FastMCP

from src.mcp_server.tools.registry import ToolCollector, error_payload
from src.model_files import ModelFile, model_from_payload
from src.models.errors import PassivityError
from src.models.ph_model import EquilibriumPoint
from src.services.analyzer_service import (
    check_affine,
    check_general,
    design_proportional_gain,
    shortage_gamma,
    stability_margin,
)
from src.services.equilibrium_service import equilibrium_from_state, find_equilibrium


def _equilibrium(
    model_file: ModelFile, x_bar: list[float] | None, u_bar: list[float] | None
) -> EquilibriumPoint:
    state = x_bar if x_bar is not None else model_file.x_bar
    level = u_bar if u_bar is not None else model_file.u_bar
    if state is not None:
        return equilibrium_from_state(model_file.model, state, level)
    if level is not None:
        return find_equilibrium(model_file.model, level)
    raise ValueError("x_bar or u_bar required (argument or model document)")


def _encode(value: float | None) -> float | str | None:
    if value is not None and math.isinf(value):
        return "inf"
    return value


def register_analysis_tools(mcp: FastMCP) -> tuple[str, ...]:
    """Register analysis tools on a FastMCP server and return their names."""

    tools = ToolCollector(mcp)

    @tools.tool("check_condition")
    async def check_condition(
        model: dict[str, object],
        x_bar: list[float] | None = None,
        u_bar: list[float] | None = None,
        general: bool = False,
        n_samples: int | None = None,
        box_low: float | None = None,
        box_high: float | None = None,
        seed: int | None = None,
    ) -> dict[str, object]:
        """Check shifted passivity of a model at an equilibrium.

        Args:
            model: Model document (n, m, F0, F, Q, R0, G and optional x_bar/u_bar)
            x_bar: Equilibrium state; solved from u_bar when omitted
            u_bar: Constant input of the equilibrium
            general: Use the sampled test instead of the exact constant-matrix test
            n_samples: Sample count for the sampled test
            box_low: Lower co-energy bound of the sampling box
            box_high: Upper co-energy bound of the sampling box
            seed: Sampling seed

        Returns:
            Condition report with verdict, lambda_max and margin epsilon.
        """

        try:
            model_file = model_from_payload(model)
            eqpt = _equilibrium(model_file, x_bar, u_bar)
            if general:
                box = None
                if box_low is not None and box_high is not None:
                    box = (box_low, box_high)
                report = check_general(
                    model_file.model, eqpt.x_bar, box, n_samples, seed=seed
                )
            else:
                report = check_affine(model_file.model, eqpt.x_bar)
        except (PassivityError, ValueError) as exc:
            return error_payload(exc)
        return {
            "status": "ok",
            "equilibrium": eqpt.to_dict(),
            "report": report.to_dict(),
        }

    @tools.tool("shortage_gamma")
    async def shortage_gamma_tool(
        model: dict[str, object],
        x_bar: list[float] | None = None,
        u_bar: list[float] | None = None,
        delta: float | None = None,
    ) -> dict[str, object]:
        """Least gamma with B + B^T - 2 R0 <= 2 gamma G G^T, and optionally a gain K_P.

        Args:
            model: Model document
            x_bar: Equilibrium state
            u_bar: Constant input of the equilibrium
            delta: Slack for K_P = (max(gamma, 0) + delta) I

        Returns:
            Report with gamma ("inf" when output feedback cannot help).
        """

        try:
            model_file = model_from_payload(model)
            eqpt = _equilibrium(model_file, x_bar, u_bar)
            report = shortage_gamma(model_file.model, eqpt.x_bar)
            payload: dict[str, object] = {
                "status": "ok",
                "gamma": _encode(report.gamma),
                "report": report.to_dict(),
            }
            if delta is not None and report.gamma is not None and not math.isinf(
                report.gamma
            ):
                payload["K_P"] = design_proportional_gain(report, delta).tolist()
        except (PassivityError, ValueError) as exc:
            return error_payload(exc)
        return payload

    @tools.tool("stability_margin")
    async def stability_margin_tool(
        model: dict[str, object],
        x_bar: list[float] | None = None,
        u_bar: list[float] | None = None,
        mode: str = "local",
    ) -> dict[str, object]:
        """Decay margin epsilon and the stability branch it supports.

        Args:
            model: Model document
            x_bar: Equilibrium state
            u_bar: Constant input of the equilibrium
            mode: "local" or "global_sampled"

        Returns:
            Report with epsilon, branch and strong-convexity modulus.
        """

        try:
            model_file = model_from_payload(model)
            eqpt = _equilibrium(model_file, x_bar, u_bar)
            report = stability_margin(model_file.model, eqpt.x_bar, mode)
        except (PassivityError, ValueError) as exc:
            return error_payload(exc)
        return {"status": "ok", "report": report.to_dict()}

    @tools.tool("find_equilibrium")
    async def find_equilibrium_tool(
        model: dict[str, object],
        u_bar: list[float],
        x0: list[float] | None = None,
    ) -> dict[str, object]:
        """Solve the steady-state relation for a constant input.

        Args:
            model: Model document
            u_bar: Constant input
            x0: Initial guess for the damped Newton iteration

        Returns:
            Equilibrium state, co-energy, output and residual.
        """

        try:
            model_file = model_from_payload(model)
            eqpt = find_equilibrium(model_file.model, u_bar, x0)
        except (PassivityError, ValueError) as exc:
            return error_payload(exc)
        return {"status": "ok", "equilibrium": eqpt.to_dict()}

    return tuple(tools.names)
