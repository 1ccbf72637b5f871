import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from beamloc.beam import BeamConfig, analyze
from beamloc.measurements import DamageScenario, make_damaged_params, synthesize_measurement

SCENARIO_DIR = Path(__file__).parent.parent / "scenarios"


@pytest.fixture(scope="session")
def paper_beam():
    return BeamConfig()


@pytest.fixture(scope="session")
def healthy_model(paper_beam):
    return analyze(paper_beam, paper_beam.healthy_params())


@pytest.fixture(scope="session")
def measured_healthy(paper_beam):
    return synthesize_measurement(paper_beam, paper_beam.healthy_params(), n_modes=5)


def damaged_measurement(config, damaged, n_modes=5, noise=0.0, seed=0):
    scenario = DamageScenario("test", tuple(damaged), noise_level=noise, seed=seed)
    params = make_damaged_params(config, scenario)
    return synthesize_measurement(config, params, n_modes, noise, seed), params


@pytest.fixture(scope="session")
def case1(paper_beam):
    """Hybrid Case I: paper elements 7 and 8 (0-based 6, 7), 25% reduction."""
    return damaged_measurement(paper_beam, [(6, 0.25), (7, 0.25)])


@pytest.fixture(scope="session")
def case2(paper_beam):
    """Hybrid Case II: two sites, 0-based {4,5} and {11,12}, 25% reduction."""
    return damaged_measurement(paper_beam, [(4, 0.25), (5, 0.25), (11, 0.25), (12, 0.25)])
