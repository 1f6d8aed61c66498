import numpy as np
import pytest

from smartcpd import backend


@pytest.fixture(params=backend.available_backends())
def kernel_backend(request):
    """Run a test once per available kernel backend."""
    previous = backend.active_name()
    backend.set_backend(request.param)
    yield request.param
    backend.set_backend(previous)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
