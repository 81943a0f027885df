import numpy as np
import pytest

from robinrecover import RobinField, build_annulus_mesh, principal_eigenpair


@pytest.fixture(scope="session")
def mesh_8_2():
    return build_annulus_mesh(1.0, 2.0, 8, 2)


@pytest.fixture(scope="session")
def mesh_32_8():
    return build_annulus_mesh(1.0, 2.0, 32, 8)


@pytest.fixture(scope="session")
def mesh_64_16():
    return build_annulus_mesh(1.0, 2.0, 64, 16)


@pytest.fixture(scope="session")
def mesh_96_24():
    return build_annulus_mesh(1.0, 2.0, 96, 24)


@pytest.fixture(scope="session")
def mesh_128_32():
    return build_annulus_mesh(1.0, 2.0, 128, 32)


@pytest.fixture(scope="session")
def eig_64_16(mesh_64_16):
    return principal_eigenpair(mesh_64_16, RobinField.constant(mesh_64_16, 1.0))


def gamma_angles(mesh):
    nodes = mesh.boundary_nodes("GAMMA")
    return np.arctan2(mesh.vertices[nodes, 1], mesh.vertices[nodes, 0])
