import pytest

from taskqr import _jit


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # compile once up front so watchdog-timed and wall-clock tests never
    # include JIT time
    _jit.warmup()
