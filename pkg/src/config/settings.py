"""Analysis settings loaded from environment variables."""

import json
from collections.abc import Callable, Iterable, Iterator
from contextlib import contextmanager
from contextvars import ContextVar
from functools import lru_cache
from typing import cast

from pydantic import Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic_settings.sources.providers.dotenv import DotEnvSettingsSource
from pydantic_settings.sources.providers.env import EnvSettingsSource


# Fields that accept comma-separated strings in .env
_COMMA_LIST_FIELDS = frozenset({"default_sample_box", "mcp_enabled_tools"})

_POSITIVE_FIELDS = (
    "skew_rel_tol",
    "psd_rel_tol",
    "equilibrium_tol",
    "newton_tol",
    "forward_fd_step",
    "central_fd_rel_step",
    "two_path_rel_tol",
    "gamma_bisection_width",
    "dissipation_rel_tol",
    "monotonicity_abs_tol",
    "default_step",
    "default_t_end",
)


def normalize_tool_names(raw_names: Iterable[str]) -> list[str]:
    """Lower-case, strip and de-duplicate tool names, keeping first occurrences."""

    return list(dict.fromkeys(name.strip().lower() for name in raw_names if name.strip()))


class _CommaListSourceMixin:
    """Allow comma-separated values for list fields instead of requiring JSON."""

    def prepare_field_value(
        self, field_name: str, field: object, value: object, value_is_complex: bool
    ) -> object:
        if field_name in _COMMA_LIST_FIELDS and isinstance(value, str):
            try:
                return json.loads(value)
            except (json.JSONDecodeError, ValueError):
                return [v.strip() for v in value.split(",") if v.strip()]
        prepare_field_value = cast(
            Callable[[str, object, object, bool], object],
            getattr(super(), "prepare_field_value"),
        )
        return prepare_field_value(field_name, field, value, value_is_complex)


class _Env(_CommaListSourceMixin, EnvSettingsSource):
    pass


class _DotEnv(_CommaListSourceMixin, DotEnvSettingsSource):
    pass


class Settings(BaseSettings):
    """Tolerances, solver limits and defaults shared by the CLI and MCP tools."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
        case_sensitive=False,
    )

    app_name: str = "shifted-passivity"
    log_level: str = "INFO"

    # scale-relative: tau = rel * (1 + ||matrix||)
    skew_rel_tol: float = 1e-9
    psd_rel_tol: float = 1e-9
    equilibrium_tol: float = 1e-8
    newton_tol: float = 1e-10
    newton_max_iter: int = Field(default=50, ge=1)
    equilibrium_max_iter: int = Field(default=100, ge=1)
    max_step_halvings: int = Field(default=30, ge=0)
    forward_fd_step: float = 1e-7
    central_fd_rel_step: float = 1e-5
    two_path_rel_tol: float = 1e-9
    gamma_bisection_width: float = 1e-9
    gamma_max_expansions: int = Field(default=60, ge=1)
    dissipation_rel_tol: float = 1e-6
    monotonicity_abs_tol: float = 1e-10

    default_step: float = 1e-3
    default_t_end: float = 20.0
    report_max_rows: int = Field(default=10_000, ge=1)

    default_sample_box: list[float] = Field(default_factory=lambda: [-5.0, 5.0])
    default_samples: int = Field(default=100, ge=1)
    sample_seed: int = 0

    mcp_enabled_tools: list[str] = Field(default_factory=list)

    @field_validator("default_sample_box", mode="before")
    @classmethod
    def _parse_default_sample_box(cls, value: object) -> list[float]:
        if value is None:
            return [-5.0, 5.0]
        if isinstance(value, str):
            parsed = [float(part) for part in value.split(",") if part.strip()]
        elif isinstance(value, (list, tuple)):
            parsed = [float(cast(float, item)) for item in value]
        else:
            raise ValueError("default_sample_box must be 'low,high' or a list")
        if len(parsed) != 2 or not parsed[0] < parsed[1]:
            raise ValueError("default_sample_box must be two increasing numbers")
        return parsed

    @field_validator("mcp_enabled_tools", mode="before")
    @classmethod
    def _parse_mcp_enabled_tools(cls, value: object) -> list[str]:
        if value is None:
            return []
        if isinstance(value, str):
            raw_items = value.split(",")
        elif isinstance(value, list):
            raw_items = [str(item) for item in value]
        else:
            raise ValueError(
                "mcp_enabled_tools must be a comma-separated string or list"
            )

        return normalize_tool_names(raw_items)

    @model_validator(mode="after")
    def _validate_positive_tolerances(self) -> "Settings":
        invalid = [name for name in _POSITIVE_FIELDS if not getattr(self, name) > 0]
        if invalid:
            raise ValueError(
                f"Tolerances and step sizes must be > 0: {', '.join(invalid)}"
            )
        return self

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls,
        init_settings,
        env_settings,
        dotenv_settings,
        file_secret_settings,
    ):
        return (
            init_settings,
            _Env(settings_cls),
            _DotEnv(
                settings_cls,
                env_file=settings_cls.model_config.get("env_file", ".env"),
                env_file_encoding=settings_cls.model_config.get(
                    "env_file_encoding", "utf-8"
                ),
            ),
            file_secret_settings,
        )


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Return a cached settings instance."""

    return Settings()


_active_settings: ContextVar[Settings | None] = ContextVar("active_settings", default=None)


def current_settings() -> Settings:
    """Return the scoped override from ``settings_override`` if any, else the cached settings."""

    return _active_settings.get() or get_settings()


@contextmanager
def settings_override(**updates: object) -> Iterator[Settings]:
    """Validate a copy of the settings with ``updates`` and make it current for the block."""

    scoped = Settings.model_validate(get_settings().model_dump() | updates)
    token = _active_settings.set(scoped)
    try:
        yield scoped
    finally:
        _active_settings.reset(token)
