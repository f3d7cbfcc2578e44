"""MCP tools package."""

from src.mcp_server.tools.analysis import register_analysis_tools
from src.mcp_server.tools.case_study import register_case_study_tools

__all__ = [
    "register_analysis_tools",
    "register_case_study_tools",
]
