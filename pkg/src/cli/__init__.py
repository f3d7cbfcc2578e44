"""Command-line interface: ``python -m src.cli``."""

from src.cli.main import RunConfig, main, parse_args, run

__all__ = ["RunConfig", "main", "parse_args", "run"]
