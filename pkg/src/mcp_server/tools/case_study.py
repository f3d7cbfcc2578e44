"""MCP tools for the built-in case studies."""

from mcp.server.fastmcp import FastMCP

from src.case_studies import (
    RigidBodyParams,
    SyncGenParams,
    load_params,
    run_rigid_body_case,
    run_sync_gen_case,
)
from src.case_studies.base import default_params_path, params_from_dict
from src.mcp_server.tools.registry import ToolCollector, error_payload
from src.models.errors import PassivityError


def register_case_study_tools(mcp: FastMCP) -> tuple[str, ...]:
    """Register case-study tools on a FastMCP server and return their names."""

    tools = ToolCollector(mcp)

    @tools.tool("rigid_body_case")
    async def rigid_body_case(params: dict[str, object] | None = None) -> dict[str, object]:
        """Condition matrix, verdict and shortage of the controlled rigid body.

        Args:
            params: Inertias m_x..m_z, gains r_x..r_z, disturbances d_x..d_z or
                omega_bar; the shipped defaults when omitted
        """

        try:
            parsed = (
                load_params(RigidBodyParams, default_params_path("rigid_body"))
                if params is None
                else params_from_dict(RigidBodyParams, params, "params")
            )
            result = run_rigid_body_case(parsed)
        except (PassivityError, ValueError) as exc:
            return error_payload(exc)
        return {"status": "ok"} | result.to_dict()

    @tools.tool("sync_gen_case")
    async def sync_gen_case(params: dict[str, object] | None = None) -> dict[str, object]:
        """Condition matrix and verdict of the sixth-order synchronous generator.

        Args:
            params: Inductances, resistances, d, m, V_f and tau; the shipped
                defaults when omitted

        Returns:
            Case report including entries that differ from the printed matrix.
        """

        try:
            parsed = (
                load_params(SyncGenParams, default_params_path("sync_gen"))
                if params is None
                else params_from_dict(SyncGenParams, params, "params")
            )
            result = run_sync_gen_case(parsed)
        except (PassivityError, ValueError) as exc:
            return error_payload(exc)
        return {"status": "ok"} | result.to_dict()

    return tuple(tools.names)
