import json
from math import cos, pi, sin

import numpy as np
import pytest

from uav_isac.allocators import AllocatorConfig, allocate
from uav_isac.cli import DEFAULT_SCENARIO, parse_scenario
from uav_isac.geometry import Scenario


def triangle(radius=100.0, altitude=100.0, num_uavs=3):
    """UAVs on a circle above the origin, first one on the +y axis."""
    angles = [pi / 2 + 2 * pi * k / num_uavs for k in range(num_uavs)]
    return [[radius * cos(a), radius * sin(a), altitude] for a in angles]


@pytest.fixture(scope="session")
def default_data():
    with open(DEFAULT_SCENARIO, "r") as file:
        return json.load(file)


@pytest.fixture(scope="session")
def default_file(default_data):
    return parse_scenario(default_data)


@pytest.fixture(scope="session")
def scenario(default_file) -> Scenario:
    return default_file.scenario


@pytest.fixture(scope="session")
def config(default_file) -> AllocatorConfig:
    return default_file.config()


@pytest.fixture
def random_scenario():
    """Factory for random non-degenerate scenarios with K UAVs above a random UE."""

    def build(seed, num_uavs=3):
        gen = np.random.default_rng(seed)
        ue = gen.uniform(-20, 20, size=3)
        ue[2] = 0.0
        positions = np.column_stack([
            gen.uniform(-150, 150, size=num_uavs),
            gen.uniform(-150, 150, size=num_uavs),
            gen.uniform(50, 150, size=num_uavs),
        ])
        return Scenario.create(positions, ue, 0.1, 5e6, 1e-9)

    return build


@pytest.fixture(scope="session")
def solved(default_file):
    """Allocations of every scheme on the default scenario, solved once per session."""
    cache = {}

    def get(scheme, **changes):
        key = (scheme, tuple(sorted(changes.items())))
        if key not in cache:
            scenario_file = default_file
            for name, value in changes.items():
                scenario_file = scenario_file.with_parameter(name, value)
            cache[key] = allocate(scheme, scenario_file.scenario, scenario_file.config(), scenario_file.model(scheme))
        return cache[key]

    return get


def random_spd(gen, n=3, low=0.5, high=5.0):
    q, _ = np.linalg.qr(gen.normal(size=(n, n)))
    return (q * gen.uniform(low, high, size=n)) @ q.T


@pytest.fixture
def spd():
    return random_spd
