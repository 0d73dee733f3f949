import numpy as np
import pytest

from langevin_cert import DoubleWell, ModelParams, SingleWell, SingularPair


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


FAMILY_CASES = [
    (SingleWell(), ModelParams(2.0, 1.0)),
    (DoubleWell(N=2), ModelParams(2.0, 1.0, N=2)),
    (SingularPair(N=2, k=1), ModelParams(2.0, 1.0, N=2, k=1)),
]


@pytest.fixture(params=FAMILY_CASES, ids=lambda c: f"{c[0].family}-d{c[0].dim}")
def family(request):
    return request.param
