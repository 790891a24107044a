import numpy as np
import pytest

from shapedesc.mesh import TriMesh
from shapedesc.remesh import generate_annulus, generate_diamond_annulus


@pytest.fixture(scope="session")
def annulus_coarse():
    return generate_annulus(1.0, 0.3, 0.1)


@pytest.fixture(scope="session")
def annulus_fine():
    return generate_annulus(1.0, 0.3, 0.05)


@pytest.fixture(scope="session")
def diamond():
    return generate_diamond_annulus(1.0, 0.3, 0.05)


@pytest.fixture
def unit_square_two():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    return TriMesh.from_triangles(nodes, np.array([[0, 1, 2], [0, 2, 3]]))


def regular_polygon_mesh(n: int, radius: float = 1.0) -> TriMesh:
    t = 2 * np.pi * np.arange(n) / n
    pts = radius * np.c_[np.cos(t), np.sin(t)]
    return TriMesh.from_triangles(pts, np.array([[0, i, i + 1] for i in range(1, n - 1)]))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
