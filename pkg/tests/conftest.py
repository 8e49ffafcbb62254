import pytest

from trihub.lattice import build_block_geometry


@pytest.fixture(scope="session")
def geometry():
    return build_block_geometry()


@pytest.fixture(scope="session")
def block_bonds(geometry):
    return geometry.intra_bonds
