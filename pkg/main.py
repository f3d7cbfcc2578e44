"""Compatibility entry point: ``python main.py <command> ...``."""

from src.cli.main import entrypoint, main

__all__ = ["main"]

if __name__ == "__main__":
    entrypoint()
