"""Dense linear algebra shared by the other modules.

Linear solves, spectral radius and equality-constrained least squares at desk
scale (matrices up to a few hundred rows).  Everything here operates on plain
numpy arrays and is pure, so the functions are safe to call concurrently.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg


class SingularMatrix(Exception):
    """A pivot below the pivot tolerance was hit during LU factorization."""


class NoConvergence(Exception):
    """An iterative routine exceeded its iteration cap."""


class InfeasibleConstraints(Exception):
    """Equality constraints are inconsistent (rank([A|b]) > rank(A))."""


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances used across the package."""

    pivot: float = 1e-12
    residual: float = 1e-9
    eigen: float = 1e-8


DEFAULT_TOL = Tolerances()


def _as_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix entries must be finite")
    return A


def _as_vector(b) -> np.ndarray:
    b = np.asarray(b, dtype=float).reshape(-1)
    if not np.all(np.isfinite(b)):
        raise ValueError("vector entries must be finite")
    return b


def solve_linear(A, b, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Solve A x = b for square A via LU with partial pivoting.

    Raises SingularMatrix when a pivot magnitude falls below ``tol.pivot``.
    """
    A = _as_matrix(A)
    b = _as_vector(b)
    n, m = A.shape
    if n != m:
        raise ValueError(f"matrix must be square, got {A.shape}")
    if b.size != n:
        raise ValueError(f"rhs length {b.size} does not match matrix size {n}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.size and pivots.min() < tol.pivot:
        raise SingularMatrix(f"pivot magnitude {pivots.min():.3e} below {tol.pivot:.0e}")
    x = scipy.linalg.lu_solve((lu, piv), b, check_finite=False)
    return x


def spectral_radius(A, tol: Tolerances = DEFAULT_TOL) -> float:
    """Maximum eigenvalue modulus of a square matrix."""
    A = _as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got {A.shape}")
    if A.shape[0] == 0:
        return 0.0
    try:
        eig = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:  # QR iteration did not converge
        raise NoConvergence(str(exc)) from exc
    return float(np.max(np.abs(eig)))


def independent_rows(A, rtol: float = 1e-10) -> list[int]:
    """Indices of a maximal linearly independent subset of rows of A."""
    A = _as_matrix(A)
    if A.shape[0] == 0:
        return []
    # QR with column pivoting on A^T ranks the rows by contribution.
    _, R, piv = scipy.linalg.qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0:
        return []
    rank = int(np.sum(diag > rtol * diag[0]))
    return sorted(int(i) for i in piv[:rank])


def eq_constrained_lsq(H, target, Aeq, beq, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Minimize (x - target)' H (x - target) subject to Aeq x = beq.

    H must be symmetric positive definite so the problem is strictly convex;
    the unique minimizer is recovered from the KKT system after dropping
    linearly dependent constraint rows.  Raises InfeasibleConstraints when the
    constraints are inconsistent.
    """
    H = _as_matrix(H)
    target = _as_vector(target)
    n = target.size
    if H.shape != (n, n):
        raise ValueError(f"H shape {H.shape} does not match target length {n}")
    if Aeq is None or np.size(Aeq) == 0:
        return target.copy()
    Aeq = _as_matrix(Aeq)
    beq = _as_vector(beq)
    if Aeq.shape[1] != n or Aeq.shape[0] != beq.size:
        raise ValueError("constraint dimensions are inconsistent")
    if np.linalg.matrix_rank(np.column_stack([Aeq, beq])) > np.linalg.matrix_rank(Aeq):
        raise InfeasibleConstraints("rank([Aeq | beq]) exceeds rank(Aeq)")
    rows = independent_rows(Aeq)
    Ar, br = Aeq[rows], beq[rows]
    m = len(rows)
    kkt = np.block([[2.0 * H, Ar.T], [Ar, np.zeros((m, m))]])
    rhs = np.concatenate([2.0 * H @ target, br])
    sol = solve_linear(kkt, rhs, tol)
    x = sol[:n]
    residual = np.max(np.abs(Ar @ x - br)) if m else 0.0
    if residual > 1e-8 * (1.0 + np.max(np.abs(br), initial=0.0)):
        raise NoConvergence(f"KKT residual {residual:.3e} too large")
    return x
