import pytest

from fdlab import FlowParams


@pytest.fixture(scope="session")
def ref_params():
    """n=5 workhorse constants used across the suite."""
    return FlowParams(n=5, m=3.0 / 7.0, lam=4.0, c1=1.0, c2=1.0)


@pytest.fixture(scope="session")
def geo_params():
    """Critical-exponent setup whose closed forms are simplest:
    u0 = (r^-3 + 1)^2 and F = r^2 + 1/r."""
    return FlowParams(n=6, m=0.5, lam=6.0, c1=1.0, c2=1.0)
