import pytest

from chaoslab.kernels import coulomb_trunc_kernel, rough_sign_kernel, sine_kernel, zero_kernel
from chaoslab.laws import MaxwellianLaw


@pytest.fixture
def law():
    return MaxwellianLaw()


@pytest.fixture
def sine():
    return sine_kernel(1.0)


CATALOG = {
    "sine": lambda: sine_kernel(1.0),
    "coulomb_trunc": lambda: coulomb_trunc_kernel(1.0, 1e-3),
    "rough_sign": lambda: rough_sign_kernel(1.0),
    "zero": lambda: zero_kernel(),
}


@pytest.fixture(params=sorted(CATALOG))
def any_kernel(request):
    return CATALOG[request.param]()
