import pytest

from focusfocus import ChampagneBottle, SphericalPendulum


@pytest.fixture(scope="session")
def champagne():
    return ChampagneBottle(gamma=0.5)


@pytest.fixture(scope="session")
def champagne0():
    return ChampagneBottle(gamma=0.0)


@pytest.fixture(scope="session")
def pendulum():
    return SphericalPendulum()
