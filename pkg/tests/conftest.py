from __future__ import annotations

from pathlib import Path

import pytest

from synergrip.hand import default_hand_model
from synergrip.synergy import default_synergy

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture(scope="session")
def model():
    return default_hand_model()


@pytest.fixture(scope="session")
def decoder(model):
    return default_synergy(model)


@pytest.fixture(scope="session")
def scenarios_dir() -> Path:
    return SCENARIOS
