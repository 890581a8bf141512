import pytest

from pudsim import (
    Experiment,
    SimraGroupMap,
    SubarrayLayout,
    load_default_profile,
    load_profile,
)


@pytest.fixture(scope="session")
def profile():
    return load_default_profile()


@pytest.fixture(scope="session")
def worstcase():
    return load_profile("worstcase")


@pytest.fixture(scope="session")
def layout():
    return SubarrayLayout.uniform(1024, 256)


@pytest.fixture(scope="session")
def groups(layout):
    return SimraGroupMap.aligned_blocks(layout, 32)


@pytest.fixture()
def experiment(profile, layout, groups):
    return Experiment(profile, layout, groups, seed=7)
