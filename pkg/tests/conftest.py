from __future__ import annotations

import os
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from infra.experiments.scenarios import parse_config, parse_scenario_text
from roaming.config import Scenario

settings.register_profile("default", max_examples=100, deadline=None)
settings.register_profile(
    "acceptance",
    max_examples=10_000,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))

EXAMPLES = Path(__file__).resolve().parents[1] / "infra" / "experiments" / "examples"


@pytest.fixture
def corridor() -> Scenario:
    return parse_config(EXAMPLES / "corridor.yaml")


@pytest.fixture
def single_cell() -> Scenario:
    return parse_config(EXAMPLES / "single_cell.yaml")


@pytest.fixture
def small_reference() -> Scenario:
    """The reference layout with few stations and a short run."""
    scenario = parse_config(EXAMPLES / "reference.yaml")
    data = scenario.model_dump(mode="python")
    data["mobility"]["stations"] = 12
    data["run"]["duration"] = "4s"
    return Scenario.model_validate(data)


@pytest.fixture
def scenario_text():
    def build(body: str) -> Scenario:
        return parse_scenario_text(body, path="inline.yaml")

    return build
