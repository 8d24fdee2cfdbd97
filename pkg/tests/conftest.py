import numpy as np
import pytest

from formation_lab import Framework, Graph, SensorModel, decompose_reference
from formation_lab.formation import blocks
from formation_lab.graph import random_tree
from formation_lab.maneuver import MotionParams

GRID_POSITIONS = np.array(
    [[-1, -1], [-1, 0], [-1, 1], [0, 1], [0, 0], [0, -1], [1, -1], [1, 0], [1, 1]], dtype=float
) * 10.0
GRID_EDGES = ((1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (5, 8), (8, 7), (8, 9))
GRID_A = np.array(
    [0.96843302, 1.00873027, 0.9546316, 1.04510691, 1.02358278, 0.95203593, 1.04006459, 0.96226732, 0.98482596]
)
GRID_R = np.array(
    [-0.15850664, -0.13158391, -0.07226048, -0.07021736, 0.03995607, -0.11761143, -0.0692078, 0.16551018, 0.1331908]
)
# published distorted relative positions, one row per edge
GRID_Z_TILDE = np.array(
    [
        [1.26245792, -10.06235038],
        [0.91330118, -9.92409706],
        [-10.65052789, -0.06477112],
        [-2.10520906, 10.3052228],
        [-0.86465511, 10.27960119],
        [-11.3181448, 0.60885649],
        [-0.33526666, 9.43683404],
        [-1.0403239, -10.29440935],
    ]
)
GRID_V_TILDE = np.array([0.33086245, -0.18446561])

SQUARE_POSITIONS = np.array([[-5, -5], [-5, 5], [5, 5], [5, -5]], dtype=float)
SQUARE_EDGES = ((1, 2), (2, 3), (1, 4))


@pytest.fixture
def grid():
    fw = Framework(Graph(9, GRID_EDGES), 2)
    return fw, decompose_reference(GRID_POSITIONS.ravel(), 2)


@pytest.fixture
def grid_sensor():
    return SensorModel.from_angles(GRID_A, GRID_R)


@pytest.fixture
def square():
    fw = Framework(Graph(4, SQUARE_EDGES), 2)
    return fw, decompose_reference(SQUARE_POSITIONS.ravel(), 2)


def random_tree_framework(rng, n, m=2, spread=10.0):
    fw = Framework(random_tree(n, rng), m)
    shape = decompose_reference(rng.uniform(-spread, spread, n * m), m)
    return fw, shape


def random_valid_motion(fw, shape, v, rng, kappa=1.0):
    """Random matrix-mode motion parameters on every edge that still realize ``v``."""
    m, n = fw.m, fw.n
    P = blocks(shape.p_star, m)
    w = np.asarray(v, dtype=float) / kappa
    mu = np.zeros((n, n, m, m))
    for i in range(n):
        nbrs = fw.graph.neighbors(i)
        for j in nbrs:
            mu[i, j] = rng.normal(size=(m, m)) * 0.05
        r = w - sum(mu[i, j] @ (P[i] - P[j]) for j in nbrs)
        d = P[i] - P[nbrs[0]]
        mu[i, nbrs[0]] += np.outer(r, d) / (d @ d)
    return MotionParams("matrix", mu)


def random_rotation(rng, m):
    q, r = np.linalg.qr(rng.normal(size=(m, m)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance_log():
    def log(criterion, ok, detail=""):
        line = f"ACCEPTANCE {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok

    return log


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
