"""H-representation polytope algebra.

A polytope is {x : F x <= g}.  The operations here (emptiness, support
functions, redundancy removal, containment, intersection and the maximal
positively invariant set under a stable linear map) are all reduced to linear
programs.  Set equality is always decided by mutual containment, never by
comparing rows, because equivalent H-representations can differ in row order
and scaling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from certnn import lp

CONTAINMENT_TOL = 1e-7
REDUNDANCY_TOL = 1e-9
FIXPOINT_TOL = 1e-7


class EmptyInput(Exception):
    """The operation requires a nonempty polytope."""


class DimensionMismatch(Exception):
    pass


class Unbounded(Exception):
    """The polytope is unbounded in the queried direction."""


class NoConvergence(Exception):
    """The invariant-set fixpoint did not terminate within the iteration cap."""


@dataclass(frozen=True)
class Polytope:
    """{x in R^n : F x <= g} with F of shape (m, n) and g of length m."""

    F: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        F = np.asarray(self.F, dtype=float)
        g = np.asarray(self.g, dtype=float).reshape(-1)
        if F.ndim != 2:
            raise ValueError(f"F must be a matrix, got shape {F.shape}")
        if F.shape[0] != g.size:
            raise ValueError(f"row count {F.shape[0]} does not match g length {g.size}")
        if not (np.all(np.isfinite(F)) and np.all(np.isfinite(g))):
            raise ValueError("polytope data must be finite")
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "g", g)

    @property
    def dim(self) -> int:
        return self.F.shape[1]

    @property
    def nrows(self) -> int:
        return self.F.shape[0]

    @staticmethod
    def box(lb, ub) -> "Polytope":
        """Axis-aligned box {lb <= x <= ub}."""
        lb = np.asarray(lb, dtype=float).reshape(-1)
        ub = np.asarray(ub, dtype=float).reshape(-1)
        n = lb.size
        eye = np.eye(n)
        return Polytope(np.vstack([eye, -eye]), np.concatenate([ub, -lb]))

    def contains_point(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float).reshape(-1)
        return bool(np.all(self.F @ x <= self.g + tol))

    def normalized(self) -> "Polytope":
        """Scale every row to unit Euclidean norm (zero rows left untouched)."""
        norms = np.linalg.norm(self.F, axis=1)
        safe = np.where(norms > 0.0, norms, 1.0)
        return Polytope(self.F / safe[:, None], self.g / safe)

    def to_json(self) -> dict:
        return {"F": self.F.tolist(), "g": self.g.tolist()}

    @staticmethod
    def from_json(data: dict) -> "Polytope":
        return Polytope(np.asarray(data["F"], dtype=float), np.asarray(data["g"], dtype=float))


def is_empty(P: Polytope) -> bool:
    """True iff the phase-one feasibility LP finds no point with F x <= g."""
    out = lp.solve_lp(lp.maximize(np.zeros(P.dim), P.F, P.g))
    return out.status == lp.LpStatus.INFEASIBLE


def support(P: Polytope, d) -> float:
    """max d.x over P.  Raises Unbounded when P is unbounded along d."""
    d = np.asarray(d, dtype=float).reshape(-1)
    if d.size != P.dim:
        raise DimensionMismatch(f"direction length {d.size} vs dimension {P.dim}")
    out = lp.solve_lp(lp.maximize(d, P.F, P.g))
    if out.status == lp.LpStatus.UNBOUNDED:
        raise Unbounded("polytope unbounded in the queried direction")
    if out.status == lp.LpStatus.INFEASIBLE:
        raise EmptyInput("support of an empty polytope")
    return out.value


def remove_redundant(P: Polytope) -> Polytope:
    """Drop rows whose removal does not change the point set.

    Row i is redundant iff maximizing F_i x over the remaining rows (with the
    bounding relaxation F_i x <= g_i + 1 to keep the LP bounded) stays below
    g_i.  Rows are scanned sequentially so that of two duplicates exactly one
    survives.
    """
    if is_empty(P):
        raise EmptyInput("cannot remove redundancy from an empty polytope")
    keep = list(range(P.nrows))
    i = 0
    while i < len(keep):
        idx = keep[i]
        others = [j for j in keep if j != idx]
        F = np.vstack([P.F[others], P.F[idx : idx + 1]])
        g = np.concatenate([P.g[others], [P.g[idx] + 1.0]])
        out = lp.solve_lp(lp.maximize(P.F[idx], F, g))
        if out.status == lp.LpStatus.OPTIMAL and out.value <= P.g[idx] + REDUNDANCY_TOL:
            keep.pop(i)
        else:
            i += 1
    return Polytope(P.F[keep], P.g[keep])


def contains_set(outer: Polytope, inner: Polytope, tol: float = CONTAINMENT_TOL) -> bool:
    """True iff inner is a subset of outer (support check per outer row)."""
    if outer.dim != inner.dim:
        raise DimensionMismatch(f"dimensions {outer.dim} and {inner.dim} differ")
    if is_empty(inner):
        raise EmptyInput("containment of an empty inner polytope")
    for row, rhs in zip(outer.F, outer.g):
        try:
            if support(inner, row) > rhs + tol:
                return False
        except Unbounded:
            return False
    return True


def intersect(P: Polytope, Q: Polytope) -> Polytope:
    """Row-stack of both sets with redundant rows removed."""
    if P.dim != Q.dim:
        raise DimensionMismatch(f"dimensions {P.dim} and {Q.dim} differ")
    stacked = Polytope(np.vstack([P.F, Q.F]), np.concatenate([P.g, Q.g]))
    if is_empty(stacked):
        return stacked
    return remove_redundant(stacked)


def max_positively_invariant(A_cl, P: Polytope, max_iter: int = 500) -> Polytope:
    """Largest O inside P with A_cl O inside O, for a stable linear map.

    Computed by the preimage fixpoint O_{k+1} = O_k /\\ {x : A_cl x in O_k};
    each iteration appends the rows (F A_cl, g) and prunes redundancy.  The
    fixpoint is reached when every appended row is already redundant, i.e.
    mutual containment of consecutive iterates holds.
    """
    A_cl = np.asarray(A_cl, dtype=float)
    if A_cl.shape != (P.dim, P.dim):
        raise DimensionMismatch(f"map shape {A_cl.shape} vs dimension {P.dim}")
    if is_empty(P):
        raise EmptyInput("invariant set of an empty polytope")
    omega = remove_redundant(P)
    for _ in range(max_iter):
        mapped_F = omega.F @ A_cl
        mapped_g = omega.g
        converged = True
        for row, rhs in zip(mapped_F, mapped_g):
            try:
                val = support(omega, row)
            except Unbounded:
                val = np.inf
            if val > rhs + FIXPOINT_TOL:
                converged = False
                break
        if converged:
            return omega
        stacked = Polytope(np.vstack([omega.F, mapped_F]), np.concatenate([omega.g, mapped_g]))
        if is_empty(stacked):
            # the constraints squeezed everything out; the empty set is the
            # (trivially invariant) fixpoint
            return stacked
        omega = remove_redundant(stacked)
    raise NoConvergence(f"no fixpoint after {max_iter} iterations")


def bounding_box(P: Polytope) -> tuple[np.ndarray, np.ndarray]:
    """Per-coordinate [lo, hi] of P via support LPs.  Raises Unbounded."""
    lo = np.empty(P.dim)
    hi = np.empty(P.dim)
    for i in range(P.dim):
        e = np.zeros(P.dim)
        e[i] = 1.0
        hi[i] = support(P, e)
        lo[i] = -support(P, -e)
    return lo, hi


def vertices_2d(P: Polytope, tol: float = 1e-7) -> np.ndarray:
    """Vertices of a bounded 2-D polytope, ordered counter-clockwise.

    Enumerates pairwise facet intersections and keeps the feasible ones;
    adequate for plot output, not meant for high row counts.
    """
    if P.dim != 2:
        raise DimensionMismatch("vertex enumeration implemented for 2-D only")
    pts = []
    m = P.nrows
    for i in range(m):
        for j in range(i + 1, m):
            M = np.vstack([P.F[i], P.F[j]])
            if abs(np.linalg.det(M)) < 1e-12:
                continue
            v = np.linalg.solve(M, np.array([P.g[i], P.g[j]]))
            if P.contains_point(v, tol):
                pts.append(v)
    if not pts:
        return np.zeros((0, 2))
    pts = np.array(pts)
    # deduplicate
    uniq: list[np.ndarray] = []
    for v in pts:
        if not any(np.linalg.norm(v - u) < 1e-8 for u in uniq):
            uniq.append(v)
    pts = np.array(uniq)
    center = pts.mean(axis=0)
    order = np.argsort(np.arctan2(pts[:, 1] - center[1], pts[:, 0] - center[0]))
    return pts[order]
