"""
Shared pytest fixtures for all test modules.
"""
import json
import math
import os
from pathlib import Path

import numpy as np
import pytest

# Set up test environment variables before the package reads them
os.environ['QBSPEED_LOG_LEVEL'] = 'WARNING'
os.environ['QBSPEED_SEED'] = '1234'
os.environ['QBSPEED_RESTARTS'] = '8'
os.environ['QBSPEED_JOBS'] = '1'

from qbspeed.bounds.optimizer import OptimizerConfig  # noqa: E402
from qbspeed.core.linalg import HermitianOperator, PureState  # noqa: E402

FIXTURES_DIR = Path(__file__).parent / 'fixtures'

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)


@pytest.fixture
def rng():
    """Deterministic generator shared by randomized tests."""
    return np.random.default_rng(20240601)


@pytest.fixture
def optimizer_config():
    """Few restarts, fixed seed."""
    return OptimizerConfig(restarts=8, seed=7)


@pytest.fixture
def qubit_rabi():
    """Ground-state qubit, H = sigma_x / 2, H0 = diag(0, 1): F(t) = sin^2(t/2)."""
    return {
        'rho': PureState.basis(0, 2),
        'H': HermitianOperator(SIGMA_X / 2),
        'H0': HermitianOperator(np.diag([0.0, 1.0])),
        'period': 2 * math.pi,
    }


@pytest.fixture
def load_fixture():
    """Load a JSON experiment config from tests/fixtures."""
    def _load(name: str) -> dict:
        with open(FIXTURES_DIR / name, 'r', encoding='utf-8') as f:
            return json.load(f)
    return _load


@pytest.fixture
def write_config(tmp_path):
    """Write an experiment config into tmp_path and point its output there."""
    def _write(body: dict, name: str = 'experiment.json') -> Path:
        body = dict(body)
        body.setdefault('output_path', str(tmp_path / 'out'))
        path = tmp_path / name
        path.write_text(json.dumps(body), encoding='utf-8')
        return path
    return _write
