"""Shared fixtures: the three reference systems and sampling helpers."""

import json
from importlib import resources

import pytest

from algmech import load_config
from algmech.config import SystemConfig, parse_config


def _load(name: str) -> SystemConfig:
    return load_config(resources.files("algmech").joinpath(f"fixtures/{name}.json"))


@pytest.fixture(scope="session")
def driftless() -> SystemConfig:
    return _load("driftless")


@pytest.fixture(scope="session")
def abelian() -> SystemConfig:
    return _load("abelian")


@pytest.fixture(scope="session")
def heisenberg() -> SystemConfig:
    return _load("heisenberg")


@pytest.fixture(scope="session")
def all_systems(driftless, abelian, heisenberg):
    return (driftless, abelian, heisenberg)


@pytest.fixture(scope="session")
def forced() -> SystemConfig:
    """Driftless system with a base potential: the canonical field is a
    genuine semispray but not a spray (its components are inhomogeneous)."""
    raw = json.loads(
        resources.files("algmech").joinpath("fixtures/driftless.json").read_bytes()
    )
    raw["name"] = "forced"
    raw["lagrangian"] = "0.5*(u1^2+u2^2)+x3"
    raw["candidates"] = [
        {
            "kind": "conserved_function",
            "name": "total-energy",
            "expr": "0.5*(u1^2+u2^2)-x3",
            "expect": {"conserved": True},
        },
        {
            "kind": "conserved_function",
            "name": "height",
            "expr": "x3",
            "expect": {"conserved": False},
        },
    ]
    del raw["reference"]
    return parse_config(raw)


@pytest.fixture(scope="session")
def driftless_samples(driftless):
    return driftless.sample_points()

