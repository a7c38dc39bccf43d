import os

import numpy as np
import pytest

from optics_percolation.circuit_graph import Circuit, InputSpec

ROOT_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIG_DIR = os.path.join(ROOT_DIR, "config")


@pytest.fixture
def config_dir():
    return CONFIG_DIR


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def hom_circuit():
    return Circuit.from_layers(2, [[(0, 1, np.pi / 4, 0.0)]])


@pytest.fixture
def small_circuit():
    """Depth-2 six-mode circuit shipped in config/circuits."""
    return Circuit.from_json(os.path.join(CONFIG_DIR, "circuits", "depth2_6modes.json"))


@pytest.fixture
def three_photons():
    return InputSpec.single_photons([0, 2, 4])
