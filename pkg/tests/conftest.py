"""
Shared fixtures for the test suite
"""

import sys
import os
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

import numpy as np
import pytest

from rtl.dataset import Dataset
from rtl.estimator import TrainConfig


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help='run desk-scale acceptance studies')


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: desk-scale study, needs --runslow')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def clear_rtl_env(monkeypatch):
    monkeypatch.delenv('RTL_SEED', raising=False)
    monkeypatch.delenv('RTL_WORKERS', raising=False)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def fast_train():
    return TrainConfig(epochs=30, lr=0.05, patience=10, seed=3)


def make_linear_domain(rng, n, beta, q=2, noise=0.0, domain_id='domain'):
    """y = X beta + sin(z1) + noise, X and Z uniform on [-1, 1]"""
    beta = np.asarray(beta, dtype=float)
    X = rng.uniform(-1, 1, size=(n, beta.size))
    Z = rng.uniform(-1, 1, size=(n, q))
    y = X @ beta + np.sin(Z[:, 0]) + noise * rng.standard_normal(n)
    return Dataset(y, X, Z, domain_id)


@pytest.fixture
def small_domains(rng):
    beta = np.array([1.0, -0.5])
    return [make_linear_domain(rng, 60, beta, noise=0.1, domain_id=f'source{k}') for k in range(1, 4)]


@pytest.fixture
def domain_factory(rng):
    def build(n, beta, q=2, noise=0.0, domain_id='domain'):
        return make_linear_domain(rng, n, beta, q, noise, domain_id)
    return build
