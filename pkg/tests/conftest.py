"""Session-wide fixtures: the expensive solves are shared across modules."""

import pytest

from bn6.auxiliary import build_profiles
from bn6.shooting import find_lambda0


@pytest.fixture(scope="session")
def certificate():
    return find_lambda0(6)


@pytest.fixture(scope="session")
def profiles(certificate):
    return build_profiles(6, certificate, grid_n=4096)


@pytest.fixture(scope="session")
def profiles_coarse(certificate):
    return build_profiles(6, certificate, grid_n=2048)
