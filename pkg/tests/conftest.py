import numpy as np
import pytest

from ghdo.lindblad import build_tfim
from ghdo.models import NetworkAghdo
from ghdo.network import NetworkSpec


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_model():
    """Random N=3, R=2 network model used across estimator tests."""
    spec = NetworkSpec(sites=3, local_rank=2, feature_densities=(4,), init_width=0.05, seed=42)
    return NetworkAghdo.random(spec)


@pytest.fixture(scope="session")
def tfim2():
    return build_tfim(2, 2.0, 1.3, 1.0, periodic=False)


@pytest.fixture(scope="session")
def tfim2_steady(tfim2):
    from ghdo import oracle

    return oracle.steady_state_dense(tfim2)
