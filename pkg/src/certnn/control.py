"""LTI plant model, discrete-time LQR synthesis and closed-loop simulation."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from certnn import numerics
from certnn.network import ReluNetwork
from certnn.polytope import Polytope, intersect, max_positively_invariant

RICCATI_TOL = 1e-10
RICCATI_MAX_ITER = 100_000


class NoConvergence(Exception):
    """Riccati iteration did not converge (pair not stabilizable or bad weights)."""


@dataclass(frozen=True)
class LtiSystem:
    """x+ = A x + B u."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got {A.shape}")
        if B.ndim != 2 or B.shape[0] != A.shape[0]:
            raise ValueError(f"B shape {B.shape} does not match A {A.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_u(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True)
class LqrSolution:
    K: np.ndarray  # u = -K x
    P: np.ndarray  # value matrix, symmetric PSD


def lqr(sys: LtiSystem, Q, R) -> LqrSolution:
    """Infinite-horizon discrete LQR via fixed-point Riccati backward iteration.

    Converges elementwise to RICCATI_TOL; raises NoConvergence after the
    iteration cap, which operationally signals a non-stabilizable pair.
    """
    A, B = sys.A, sys.B
    Q = np.asarray(Q, dtype=float)
    R = np.asarray(R, dtype=float)
    Q = 0.5 * (Q + Q.T)
    R = 0.5 * (R + R.T)
    if np.min(np.linalg.eigvalsh(Q)) < -1e-10:
        raise ValueError("Q must be positive semidefinite")
    if np.min(np.linalg.eigvalsh(R)) <= 0.0:
        raise ValueError("R must be positive definite")
    P = Q.copy()
    for _ in range(RICCATI_MAX_ITER):
        BtP = B.T @ P
        K = np.linalg.solve(R + BtP @ B, BtP @ A)
        P_next = Q + A.T @ P @ A - A.T @ P @ B @ K
        P_next = 0.5 * (P_next + P_next.T)
        if not np.all(np.isfinite(P_next)) or np.max(np.abs(P_next)) > 1e150:
            raise NoConvergence("Riccati iteration diverged (pair not stabilizable)")
        if np.max(np.abs(P_next - P)) < RICCATI_TOL:
            P = P_next
            break
        P = P_next
    else:
        raise NoConvergence(f"Riccati iteration exceeded {RICCATI_MAX_ITER} iterations")
    BtP = B.T @ P
    K = np.linalg.solve(R + BtP @ B, BtP @ A)
    if numerics.spectral_radius(A - B @ K) >= 1.0:
        raise NoConvergence("Riccati fixed point does not stabilize the closed loop")
    return LqrSolution(K=K, P=P)


def input_admissible_states(K, U: Polytope) -> Polytope:
    """States where the feedback u = -K x satisfies the input constraints."""
    K = np.asarray(K, dtype=float)
    return Polytope(-U.F @ K, U.g.copy())


def lqr_admissible_set(sys: LtiSystem, K, X: Polytope, U: Polytope) -> Polytope:
    """Region where u = -K x can run forever without violating X or U.

    Maximal positively invariant set of the closed loop A - B K inside
    X intersected with the input-admissible states.
    """
    K = np.asarray(K, dtype=float).reshape(sys.n_u, sys.n_x)
    constraints = intersect(X, input_admissible_states(K, U))
    return max_positively_invariant(sys.A - sys.B @ K, constraints)


@dataclass(frozen=True)
class Trajectory:
    states: np.ndarray  # (k+1, n_x)
    inputs: np.ndarray  # (k, n_u)


def simulate(sys: LtiSystem, net: ReluNetwork, x0, k: int) -> Trajectory:
    """Roll the closed loop x+ = A x + B N(x) for k steps."""
    x = np.asarray(x0, dtype=float).reshape(-1)
    states = [x]
    inputs = []
    for _ in range(k):
        u = net.eval(x)
        x = sys.A @ x + sys.B @ u
        inputs.append(u)
        states.append(x)
    return Trajectory(np.array(states), np.array(inputs))


def system_from_json(data: dict) -> tuple[LtiSystem, dict]:
    """Parse the system file schema; returns the plant and the auxiliary sets.

    Expected keys: A, B, X (polytope), U (polytope) or U_box ({lb, ub}),
    optional Q, R.  The returned dict carries X, U, U_box, Q, R.
    """
    sys = LtiSystem(np.asarray(data["A"], dtype=float), np.asarray(data["B"], dtype=float))
    aux: dict = {"Q": None, "R": None, "U_box": None}
    aux["X"] = Polytope.from_json(data["X"])
    if "U_box" in data:
        lb = np.asarray(data["U_box"]["lb"], dtype=float)
        ub = np.asarray(data["U_box"]["ub"], dtype=float)
        aux["U_box"] = (lb, ub)
        aux["U"] = Polytope.box(lb, ub)
    elif "U" in data:
        aux["U"] = Polytope.from_json(data["U"])
    else:
        raise ValueError("system file needs either U or U_box")
    if "Q" in data:
        aux["Q"] = np.asarray(data["Q"], dtype=float)
    if "R" in data:
        aux["R"] = np.asarray(data["R"], dtype=float)
    return sys, aux


def load_system(path) -> tuple[LtiSystem, dict]:
    with open(path) as f:
        return system_from_json(json.load(f))
