import numpy as np
import pytest

from certnn.control import LtiSystem
from certnn.network import ReluNetwork
from certnn.polytope import Polytope


# Double-integrator case study: plant, constraints and reference sets.
CASE_A = np.array([[0.5403, -0.8415], [0.8415, 0.5403]])
CASE_B = np.array([[-0.4597], [0.8415]])
CASE_Q = 2.0 * np.eye(2)
CASE_R = np.array([[1.0]])
CASE_K = np.array([[0.2501, 0.8290]])

CASE_C_IN = np.array(
    [
        [0.0707, -0.9975],
        [-0.1509, -0.9885],
        [-0.8011, -0.5984],
        [-0.9797, 0.2004],
        [0.8776, -0.4795],
        [0.9797, -0.2004],
        [0.8012, 0.5984],
        [0.1509, 0.9885],
        [-0.0707, 0.9975],
        [-0.8776, 0.4754],
    ]
)
CASE_c_IN = np.array(
    [3.0297, 2.9401, 3.5051, 3.2918, 3.3082, 3.2918, 3.5051, 2.9401, 3.0297, 3.3082]
)

CASE_F_LQR = np.array(
    [[-0.6870, 0.24566], [0.6870, -0.2456], [-0.2501, -0.8290], [0.2501, 0.8290]]
)
CASE_g_LQR = np.ones(4)

CASE_F_EQ = np.array(
    [[-0.2527, -0.7318], [0.2646, 0.0201], [-0.3536, 0.4097], [0.3115, 0.6526]]
)
CASE_g_EQ = np.array([0.9025, 0.2673, 0.2484, 0.8415])

CASE_C_AS = np.array(
    [
        [-0.3264, -0.9452],
        [-0.6533, 0.7571],
        [-0.2889, -0.9574],
        [0.9971, 0.0759],
        [0.8301, -0.5576],
        [-0.2888, -0.9574],
        [0.4307, 0.9025],
    ]
)
CASE_c_AS = np.array([1.1657, 0.4590, 1.1548, 1.0070, 1.1920, 1.1549, 1.1637])


@pytest.fixture
def case_system():
    return LtiSystem(CASE_A, CASE_B)


@pytest.fixture
def case_X():
    return Polytope.box([-5.0, -5.0], [5.0, 5.0])


@pytest.fixture
def case_U():
    return Polytope.box([-1.0], [1.0])


@pytest.fixture
def case_Xin():
    return Polytope(CASE_C_IN, CASE_c_IN)


@pytest.fixture
def identity_pair_net():
    """1-D net computing max(x,0) - max(-x,0) = x."""
    return ReluNetwork(
        [
            (np.array([[1.0], [-1.0]]), np.zeros(2)),
            (np.array([[1.0, -1.0]]), np.zeros(1)),
        ]
    )


def random_net(rng, n_x, widths, n_u, scale=1.0):
    layers = []
    prev = n_x
    for w in list(widths) + [n_u]:
        W = scale * rng.standard_normal((w, prev))
        b = scale * rng.standard_normal(w)
        layers.append((W, b))
        prev = w
    return ReluNetwork(layers)
