"""Configuration helpers."""

from src.config.settings import Settings, current_settings, get_settings, settings_override

__all__ = ["Settings", "current_settings", "get_settings", "settings_override"]
