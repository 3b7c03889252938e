import os

import numpy as np
import pytest

# keep sweeps reproducible in timing-sensitive CI boxes; results do not depend on it
os.environ.setdefault("FURUTA_BENCH_THREADS", str(min(8, os.cpu_count() or 1)))

from furuta_bench.config import ExperimentConfig  # noqa: E402
from furuta_bench.dynamics import load_params  # noqa: E402


@pytest.fixture(scope="session")
def params():
    return load_params()


@pytest.fixture(scope="session")
def config():
    return ExperimentConfig.load()


@pytest.fixture(scope="session")
def setup(config):
    return config.setup()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
