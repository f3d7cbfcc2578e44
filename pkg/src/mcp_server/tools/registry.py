"""Tool registration helpers shared by the MCP tool modules."""

from collections.abc import Callable
from typing import Any, TypeVar

from mcp.server.fastmcp import FastMCP

ToolFunction = TypeVar("ToolFunction", bound=Callable[..., Any])


class ToolCollector:
    """Registers tools on a server and records their names in registration order."""

    def __init__(self, mcp: FastMCP) -> None:
        self._mcp = mcp
        self.names: list[str] = []

    def tool(self, name: str) -> Callable[[ToolFunction], ToolFunction]:
        register = self._mcp.tool(name=name)

        def decorator(function: ToolFunction) -> ToolFunction:
            _ = register(function)
            self.names.append(name)
            return function

        return decorator


def error_payload(exc: Exception) -> dict[str, object]:
    return {"status": "error", "error_type": type(exc).__name__, "reason": str(exc)}
