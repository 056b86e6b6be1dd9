import numpy as np
import pytest

from rnsckks.params import CkksParams


@pytest.fixture(scope="session")
def default_params():
    return CkksParams.from_preset("default")


@pytest.fixture(scope="session")
def small_params():
    # tiny context for the expensive scheme-level property tests
    return CkksParams.generate(n=256, l_max=5, k=3, dnum=3, bit_size=30,
                               scale_bits=40)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
