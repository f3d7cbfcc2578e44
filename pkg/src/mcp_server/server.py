"""MCP server exposing shifted-passivity analysis over stdio."""

import logging
from collections.abc import Callable

from mcp.server.fastmcp import FastMCP

from src.config import get_settings
from src.config.settings import normalize_tool_names
from src.mcp_server.tools import register_analysis_tools, register_case_study_tools

logger = logging.getLogger(__name__)

ToolRegistrar = Callable[[FastMCP], tuple[str, ...]]

TOOL_REGISTRARS: tuple[ToolRegistrar, ...] = (
    register_analysis_tools,
    register_case_study_tools,
)

SERVER_INSTRUCTIONS = """\
Shifted-passivity analysis of port-Hamiltonian systems dx/dt = (J - R) grad H + G u
with a strictly convex Hamiltonian H.

Model documents are JSON objects. A quadratic-affine model gives F0, F (one matrix
per state), Q, R0 and G; J and R are recovered from F0 and the energy is x'Qx/2.

- check_condition: verdict satisfied_strictly / satisfied / violated for an
  equilibrium, exact for quadratic-affine models, sampled (not a proof) otherwise
- shortage_gamma: passivity shortage and the proportional gain (gamma + delta) I
- stability_margin: margin epsilon and whether stability is global or local
- find_equilibrium: forced equilibrium for a constant input u_bar
- rigid_body_case, sync_gen_case: built-in case studies with shipped parameters

Errors come back as {"status": "error", "error_type", "reason"}; "inf" stands for an
unbounded shortage."""


def create_mcp_server(enabled_tools: list[str] | None = None) -> FastMCP:
    """Build the server and keep only the allowlisted tools.

    ``enabled_tools`` overrides ``MCP_ENABLED_TOOLS``; an empty allowlist keeps
    every tool. Unknown names raise ``ValueError`` listing the available tools.
    """

    settings = get_settings()
    server = FastMCP(settings.app_name, instructions=SERVER_INSTRUCTIONS, json_response=True)

    registered: list[str] = []
    for register_tools in TOOL_REGISTRARS:
        registered.extend(register_tools(server))

    allowlist = normalize_tool_names(
        settings.mcp_enabled_tools if enabled_tools is None else enabled_tools
    )
    if not allowlist:
        return server

    unknown = [name for name in allowlist if name not in registered]
    if unknown:
        raise ValueError(
            f"Unknown analysis tools in MCP_ENABLED_TOOLS: {', '.join(unknown)}. "
            f"Available tools: {', '.join(registered)}"
        )

    for name in registered:
        if name not in allowlist:
            server.remove_tool(name)
    logger.info("MCP tools enabled: %s", ", ".join(allowlist))
    return server


def main() -> None:
    """Run MCP server via stdio transport."""

    create_mcp_server().run()


if __name__ == "__main__":
    main()
