"""Shared fixtures: repository import path, settings cache and common models."""

import sys
from collections.abc import Iterator
from pathlib import Path

import numpy as np
import pytest

ROOT_DIR = Path(__file__).resolve().parents[1]
if str(ROOT_DIR) not in sys.path:
    sys.path.insert(0, str(ROOT_DIR))

from src.case_studies.rigid_body import RigidBodyParams  # noqa: E402
from src.config.settings import get_settings  # noqa: E402

FIXTURES_DIR = ROOT_DIR / "tests" / "fixtures"


@pytest.fixture(autouse=True)
def clear_settings_cache() -> Iterator[None]:
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def anyio_backend() -> str:
    return "asyncio"


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


@pytest.fixture
def controlled_body() -> RigidBodyParams:
    """m = (1, 2, 3), R = I, d = (1, 0, 0): equilibrium omega_bar = (1, 0, 0), strict."""

    return RigidBodyParams(m_x=1.0, m_y=2.0, m_z=3.0, d_x=1.0)


@pytest.fixture
def free_body() -> RigidBodyParams:
    """Uncontrolled, undisturbed body (lossless Euler equations)."""

    return RigidBodyParams(m_x=1.0, m_y=2.0, m_z=3.0, r_x=0.0, r_y=0.0, r_z=0.0)
