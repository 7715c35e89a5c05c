"""Shared fixtures."""

import numpy as np
import pytest

from aster.dynamics import PhysicalParams
from aster.env import EnvConfig
from aster.seeding import SeedManager

# pylint: disable=missing-function-docstring


@pytest.fixture
def params() -> PhysicalParams:
    return PhysicalParams()


@pytest.fixture
def env_cfg() -> EnvConfig:
    return EnvConfig()


@pytest.fixture
def seeds() -> SeedManager:
    return SeedManager(0)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def single_worker(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("ASTER_NUM_WORKERS", "1")
