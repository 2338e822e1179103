import warnings

import numpy as np
import pytest

from qieo_l0 import kernels
from qieo_l0.datagen import RobustGenConfig, SampleComplexityWarning, SparseGenConfig, gen_robust, gen_sparse

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def quiet_sparse(*args, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SampleComplexityWarning)
        return gen_sparse(SparseGenConfig(*args, **kw))


@pytest.fixture
def gea_small():
    return quiet_sparse(16, 50, 5, seed=1)


@pytest.fixture
def tiny_robust():
    return gen_robust(RobustGenConfig(60, 5, 0.1, seed=3))


@pytest.fixture(params=["python", "cython"])
def backend(request):
    if request.param == "cython":
        try:
            kernels.backend_module("cython")
        except ImportError:
            pytest.skip("compiled kernels not built")
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
