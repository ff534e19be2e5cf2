import numpy as np
import pytest

from povmrand import make_platonic_povm, make_polygon_povm


@pytest.fixture(scope="session")
def polygon3():
    return make_polygon_povm(3)


@pytest.fixture(scope="session")
def polygon4():
    return make_polygon_povm(4)


@pytest.fixture(scope="session")
def polygon6():
    return make_polygon_povm(6)


@pytest.fixture(scope="session")
def octahedron():
    return make_platonic_povm("octahedron")


@pytest.fixture(scope="session")
def all_builtins():
    povms = [make_polygon_povm(n) for n in (3, 4, 5, 6, 8, 10)]
    povms += [
        make_platonic_povm(k)
        for k in ("tetrahedron", "octahedron", "cube", "icosahedron", "dodecahedron")
    ]
    return povms


def random_disk_points(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniform points in the closed unit disk, as (n, 3) ZX Bloch vectors."""
    radii = np.sqrt(rng.random(n))
    angles = 2.0 * np.pi * rng.random(n)
    pts = np.zeros((n, 3))
    pts[:, 0] = radii * np.sin(angles)
    pts[:, 2] = radii * np.cos(angles)
    return pts


def random_ball_points(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniform points in the closed unit ball."""
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    return v * (rng.random(n) ** (1.0 / 3.0))[:, None]
