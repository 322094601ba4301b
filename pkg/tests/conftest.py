import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import icbench as ib


@pytest.fixture(scope="session")
def default_system_matrix():
    return ib.build_system_matrix(ib.default_geometry())


@pytest.fixture(scope="session")
def toy_geometry():
    return ib.Geometry(nx=4, ny=4, nz=2)


@pytest.fixture(scope="session")
def toy_system_matrix(toy_geometry):
    return ib.build_system_matrix(toy_geometry)
