import numpy as np
import pytest

from eigencrit.geometry.generators import generate_domain
from eigencrit.geometry.pencils import ConformalLaplacePencil, SteklovPencil
from eigencrit.pencil import AffinePencil

BUMP_CENTER = np.array([0.3, 0.5, 0.81]) / np.linalg.norm([0.3, 0.5, 0.81])


def bump_density(mesh, amp=0.3, width=0.2):
    """1 + amp * exp(-|v - c|^2 / width) around a fixed off-axis point."""
    return 1.0 + amp * np.exp(-np.sum((mesh.vertices - BUMP_CENTER) ** 2, axis=1) / width)


def random_affine_pencil(rng, n, P, double=False):
    """Random SPD-mass affine pencil; with ``double`` K0 has a repeated eigenvalue."""
    Q = np.linalg.qr(rng.standard_normal((n, n)))[0]
    ev = np.sort(rng.uniform(0.5, 5.0, n))
    if double:
        ev[1] = ev[0]
    K0 = (Q * ev) @ Q.T
    Ks = rng.standard_normal((P, n, n))
    Ks = 0.5 * (Ks + Ks.transpose(0, 2, 1))
    Ms = rng.standard_normal((P, n, n)) * 0.1
    Ms = 0.5 * (Ms + Ms.transpose(0, 2, 1))
    return AffinePencil(K0, np.eye(n), Ks, Ms)


@pytest.fixture(scope="session")
def sphere3():
    return generate_domain("sphere", 3)


@pytest.fixture(scope="session")
def sphere4():
    return generate_domain("sphere", 4)


@pytest.fixture(scope="session")
def sphere3_pencil(sphere3):
    return ConformalLaplacePencil(sphere3)


@pytest.fixture(scope="session")
def sphere4_pencil(sphere4):
    return ConformalLaplacePencil(sphere4)


@pytest.fixture(scope="session")
def disk4():
    return generate_domain("flat_disk", 4)


@pytest.fixture(scope="session")
def disk4_steklov(disk4):
    return SteklovPencil(disk4)
