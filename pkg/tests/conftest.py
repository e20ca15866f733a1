import numpy as np
import pytest

from polarae.codes import CodeSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture(scope="session")
def rm16():
    return CodeSpec.reed_muller(4, 2)


@pytest.fixture(scope="session")
def rm128():
    return CodeSpec.reed_muller(7, 3)
