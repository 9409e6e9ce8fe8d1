import pytest

from inferwatt import bundled


@pytest.fixture(scope="session")
def hw():
    return bundled.reference_profile()


@pytest.fixture(scope="session")
def coeffs():
    return bundled.reference_coefficients()


@pytest.fixture(scope="session")
def llama8b():
    return bundled.bundled_model("llama31-8b")
