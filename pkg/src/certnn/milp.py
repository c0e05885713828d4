"""Big-M MILP encodings of ReLU networks and an embedded branch-and-bound.

Each hidden neuron z = max(a, 0), with pre-activation a known to lie in
[lo, hi], is linearized with one binary t (t = 1 forces z = 0, t = 0 forces
z = a):

    z >= a,   z <= a + M_neg * t,   z >= 0,   z <= M_pos * (1 - t),

with per-neuron constants M_pos = max(hi, 0) and M_neg = max(-lo, 0) taken
from interval bound propagation seeded by support LPs over the input
polytope.  Neurons whose pre-activation interval is sign-determined get their
binary fixed up front.  The same pass, repeated per time step and chained
through the plant x+ = A x + B u, encodes the k-step closed loop; the state
box of each step is tightened with per-coordinate LPs on the relaxation built
so far.

The solver is a best-first branch and bound on the LP relaxation, branching
on the most fractional binary (ties to the lowest index), and proves global
optimality to a relative gap of 1e-6.
"""

from __future__ import annotations

import heapq
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from certnn import lp
from certnn.network import ReluNetwork
from certnn.polytope import Polytope, Unbounded, bounding_box

INTEGRALITY_TOL = 1e-6
PRUNE_TOL = 1e-9
GAP_REL = 1e-6


class UnboundedInput(Exception):
    """The input polytope is unbounded in some coordinate."""


class MilpError(Exception):
    pass


class BnbStatus:
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"


@dataclass
class NeuronBounds:
    """Pre-activation intervals and derived big-M constants, per hidden layer."""

    input_lo: np.ndarray
    input_hi: np.ndarray
    pre_lo: list[np.ndarray]
    pre_hi: list[np.ndarray]
    out_lo: np.ndarray
    out_hi: np.ndarray

    @property
    def m_pos(self) -> list[np.ndarray]:
        return [np.maximum(hi, 0.0) for hi in self.pre_hi]

    @property
    def m_neg(self) -> list[np.ndarray]:
        return [np.maximum(-lo, 0.0) for lo in self.pre_lo]

    @property
    def m_global(self) -> float:
        return float(max((hi.max(initial=0.0) for hi in self.pre_hi), default=0.0) + 1.0)


@dataclass
class MilpModel:
    """maximize c.x over A_ub x <= b_ub, A_eq x = b_eq, lb <= x <= ub, x[binaries] in {0,1}."""

    c: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    binaries: np.ndarray
    bigm: np.ndarray  # M_pos per binary, after any scaling
    x0_idx: np.ndarray
    out_idx: np.ndarray

    def relax(self, lb=None, ub=None) -> lp.LinearProgram:
        """LP relaxation (binaries relaxed to their box), optionally with node bounds."""
        return lp.LinearProgram(
            self.c,
            self.A_ub,
            self.b_ub,
            self.lb if lb is None else lb,
            self.ub if ub is None else ub,
            A_eq=self.A_eq if self.A_eq.size else None,
            b_eq=self.b_eq if self.A_eq.size else None,
        )


@dataclass
class BnbResult:
    status: str
    value: float | None = None
    point: np.ndarray | None = None
    nodes: int = 0


def _interval_affine(W, b, lo, hi):
    Wp = np.maximum(W, 0.0)
    Wn = np.minimum(W, 0.0)
    return Wp @ lo + Wn @ hi + b, Wp @ hi + Wn @ lo + b


def bounds_from_box(net: ReluNetwork, lo, hi) -> NeuronBounds:
    """Interval arithmetic pass through the network from an input box."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    pre_lo, pre_hi = [], []
    cur_lo, cur_hi = lo, hi
    for W, b in net.layers[:-1]:
        a_lo, a_hi = _interval_affine(W, b, cur_lo, cur_hi)
        pre_lo.append(a_lo)
        pre_hi.append(a_hi)
        cur_lo, cur_hi = np.maximum(a_lo, 0.0), np.maximum(a_hi, 0.0)
    W, b = net.layers[-1]
    out_lo, out_hi = _interval_affine(W, b, cur_lo, cur_hi)
    return NeuronBounds(lo, hi, pre_lo, pre_hi, out_lo, out_hi)


def propagate_bounds(net: ReluNetwork, X_in: Polytope) -> NeuronBounds:
    """Per-neuron pre-activation intervals over an input polytope."""
    try:
        lo, hi = bounding_box(X_in)
    except Unbounded as exc:
        raise UnboundedInput("input polytope unbounded in some coordinate") from exc
    return bounds_from_box(net, lo, hi)


class _Builder:
    """Accumulates variables and rows; assembles dense arrays on demand."""

    def __init__(self):
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.rows_ub: list[tuple[np.ndarray, np.ndarray, float]] = []
        self.rows_eq: list[tuple[np.ndarray, np.ndarray, float]] = []
        self.binaries: list[int] = []
        self.bigm: list[float] = []

    @property
    def n_vars(self) -> int:
        return len(self.lb)

    def new_vars(self, n, lo, hi) -> np.ndarray:
        lo = np.broadcast_to(np.asarray(lo, dtype=float), (n,))
        hi = np.broadcast_to(np.asarray(hi, dtype=float), (n,))
        start = self.n_vars
        self.lb.extend(lo.tolist())
        self.ub.extend(hi.tolist())
        return np.arange(start, start + n)

    def add_ub(self, idx, coef, rhs):
        self.rows_ub.append((np.asarray(idx), np.asarray(coef, dtype=float), float(rhs)))

    def add_eq(self, idx, coef, rhs):
        self.rows_eq.append((np.asarray(idx), np.asarray(coef, dtype=float), float(rhs)))

    def _assemble(self, rows):
        A = np.zeros((len(rows), self.n_vars))
        b = np.zeros(len(rows))
        for i, (idx, coef, rhs) in enumerate(rows):
            A[i, idx] = coef
            b[i] = rhs
        return A, b

    def build(self, objective_idx, objective_coef, x0_idx, out_idx) -> MilpModel:
        c = np.zeros(self.n_vars)
        c[np.asarray(objective_idx)] = objective_coef
        A_ub, b_ub = self._assemble(self.rows_ub)
        A_eq, b_eq = self._assemble(self.rows_eq)
        return MilpModel(
            c,
            A_ub,
            b_ub,
            A_eq,
            b_eq,
            np.array(self.lb),
            np.array(self.ub),
            np.array(self.binaries, dtype=int),
            np.array(self.bigm),
            np.asarray(x0_idx),
            np.asarray(out_idx),
        )


def _encode_network(builder: _Builder, net: ReluNetwork, x_idx, nb: NeuronBounds, bigm_scale):
    """Add one network evaluation; returns the indices of the output variables."""
    prev_idx = np.asarray(x_idx)
    for layer, (W, b) in enumerate(net.layers[:-1]):
        n_l, n_prev = W.shape
        lo, hi = nb.pre_lo[layer], nb.pre_hi[layer]
        m_pos = np.maximum(hi, 0.0) * bigm_scale
        m_neg = np.maximum(-lo, 0.0) * bigm_scale
        z_idx = builder.new_vars(n_l, 0.0, np.maximum(hi, 0.0))
        # Sign-determined neurons get their indicator fixed.
        t_lo = np.where(hi <= 0.0, 1.0, 0.0)
        t_hi = np.where(lo >= 0.0, 0.0, 1.0)
        t_idx = builder.new_vars(n_l, t_lo, t_hi)
        builder.binaries.extend(t_idx.tolist())
        builder.bigm.extend(m_pos.tolist())
        for j in range(n_l):
            row = W[j]
            # a_j - z_j <= -b_j        (z >= W xi + b)
            builder.add_ub(np.append(prev_idx, z_idx[j]), np.append(row, -1.0), -b[j])
            # z_j - a_j - M_neg t_j <= b_j
            builder.add_ub(
                np.concatenate([prev_idx, [z_idx[j]], [t_idx[j]]]),
                np.concatenate([-row, [1.0], [-m_neg[j]]]),
                b[j],
            )
            # z_j + M_pos t_j <= M_pos
            builder.add_ub([z_idx[j], t_idx[j]], [1.0, m_pos[j]], m_pos[j])
        prev_idx = z_idx
    W, b = net.layers[-1]
    u_idx = builder.new_vars(net.n_u, nb.out_lo, nb.out_hi)
    for j in range(net.n_u):
        builder.add_eq(
            np.append(prev_idx, u_idx[j]), np.append(W[j], -1.0), -b[j]
        )
    return u_idx


def _add_polytope_rows(builder: _Builder, x_idx, P: Polytope):
    for row, rhs in zip(P.F, P.g):
        builder.add_ub(x_idx, row, rhs)


def encode_output_range(
    net: ReluNetwork, X_in: Polytope, direction, bigm_scale: float = 1.0
) -> MilpModel:
    """Model whose optimum is max direction.N(x) over x in X_in."""
    direction = np.asarray(direction, dtype=float).reshape(-1)
    if direction.size != net.n_u:
        raise MilpError(f"direction length {direction.size}, expected {net.n_u}")
    nb = propagate_bounds(net, X_in)
    builder = _Builder()
    x_idx = builder.new_vars(net.n_x, nb.input_lo, nb.input_hi)
    _add_polytope_rows(builder, x_idx, X_in)
    u_idx = _encode_network(builder, net, x_idx, nb, bigm_scale)
    return builder.build(u_idx, direction, x_idx, u_idx)


def _tighten_with_lp(builder: _Builder, idx) -> tuple[np.ndarray, np.ndarray]:
    """Per-coordinate min/max of the given variables over the relaxation so far."""
    A_ub, b_ub = builder._assemble(builder.rows_ub)
    A_eq, b_eq = builder._assemble(builder.rows_eq)
    lb = np.array(builder.lb)
    ub = np.array(builder.ub)
    lo = np.empty(len(idx))
    hi = np.empty(len(idx))
    for i, var in enumerate(idx):
        c = np.zeros(builder.n_vars)
        c[var] = 1.0
        for sign, dest in ((1.0, hi), (-1.0, lo)):
            out = lp.solve_lp(
                lp.LinearProgram(
                    sign * c, A_ub, b_ub, lb, ub,
                    A_eq=A_eq if A_eq.size else None,
                    b_eq=b_eq if A_eq.size else None,
                )
            )
            if out.status != lp.LpStatus.OPTIMAL:
                raise MilpError(f"bound-tightening LP {out.status.value}")
            dest[i] = sign * out.value
    return lo, hi


def encode_reach(
    system, net: ReluNetwork, X_in: Polytope, k: int, direction, bigm_scale: float = 1.0
) -> MilpModel:
    """Model whose optimum is max direction.x_k over k closed-loop steps from X_in."""
    if k < 1:
        raise MilpError("need k >= 1")
    direction = np.asarray(direction, dtype=float).reshape(-1)
    A = np.asarray(system.A, dtype=float)
    B = np.asarray(system.B, dtype=float)
    n_x = A.shape[0]
    if direction.size != n_x:
        raise MilpError(f"direction length {direction.size}, expected {n_x}")
    try:
        lo, hi = bounding_box(X_in)
    except Unbounded as exc:
        raise UnboundedInput("input polytope unbounded in some coordinate") from exc
    builder = _Builder()
    x_idx = builder.new_vars(n_x, lo, hi)
    x0_idx = x_idx
    _add_polytope_rows(builder, x_idx, X_in)
    for _ in range(k):
        nb = bounds_from_box(net, lo, hi)
        u_idx = _encode_network(builder, net, x_idx, nb, bigm_scale)
        next_idx = builder.new_vars(n_x, -np.inf, np.inf)
        for i in range(n_x):
            builder.add_eq(
                np.concatenate([x_idx, u_idx, [next_idx[i]]]),
                np.concatenate([A[i], B[i], [-1.0]]),
                0.0,
            )
        lo, hi = _tighten_with_lp(builder, next_idx)
        for i, var in enumerate(next_idx):
            builder.lb[var] = lo[i]
            builder.ub[var] = hi[i]
        x_idx = next_idx
    return builder.build(x_idx, direction, x0_idx, x_idx)


def solve_milp(m: MilpModel, max_nodes: int = 1_000_000) -> BnbResult:
    """Best-first branch and bound; proves a global optimum or infeasibility."""
    nodes = 0

    def _solve(lb, ub):
        nonlocal nodes
        nodes += 1
        return lp.solve_lp(m.relax(lb, ub))

    root = _solve(m.lb, m.ub)
    if root.status == lp.LpStatus.INFEASIBLE:
        return BnbResult(BnbStatus.INFEASIBLE, nodes=nodes)
    if root.status == lp.LpStatus.UNBOUNDED:
        raise MilpError("relaxation unbounded; encoder bounds missing")

    tie = 0
    heap = [(-root.value, tie, m.lb.copy(), m.ub.copy(), root.point)]
    inc_val = -np.inf
    inc_point = None
    binaries = m.binaries
    while heap:
        neg_bound, _, lb, ub, x = heapq.heappop(heap)
        bound = -neg_bound
        if inc_point is not None and bound - inc_val <= GAP_REL * (1.0 + abs(inc_val)):
            break
        tvals = x[binaries]
        frac = np.minimum(np.abs(tvals), np.abs(1.0 - tvals))
        if frac.size == 0 or frac.max() <= INTEGRALITY_TOL:
            if bound > inc_val:
                inc_val = bound
                inc_point = x
            continue
        branch = int(np.argmax(frac))
        var = binaries[branch]
        for fix in (0.0, 1.0):
            if nodes >= max_nodes:
                raise MilpError(f"node cap {max_nodes} exceeded")
            clb, cub = lb.copy(), ub.copy()
            clb[var] = fix
            cub[var] = fix
            out = _solve(clb, cub)
            if out.status != lp.LpStatus.OPTIMAL:
                continue
            if out.value <= inc_val + PRUNE_TOL:
                continue
            tie += 1
            heapq.heappush(heap, (-out.value, tie, clb, cub, out.point))
    if inc_point is None:
        return BnbResult(BnbStatus.INFEASIBLE, nodes=nodes)
    return BnbResult(BnbStatus.OPTIMAL, value=inc_val, point=inc_point, nodes=nodes)


def _solve_directions(make_model, directions, threads: int = 1) -> list[BnbResult]:
    directions = np.atleast_2d(np.asarray(directions, dtype=float))

    def run(d):
        res = solve_milp(make_model(d))
        if res.status != BnbStatus.OPTIMAL:
            raise MilpError("direction query infeasible; input set is empty")
        return res

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, directions))
    return [run(d) for d in directions]


def output_range_results(
    net: ReluNetwork, X_in: Polytope, directions, threads: int = 1
) -> list[BnbResult]:
    return _solve_directions(
        lambda d: encode_output_range(net, X_in, d), directions, threads
    )


def output_range(net: ReluNetwork, X_in: Polytope, directions, threads: int = 1) -> np.ndarray:
    """Exact per-direction maxima of the network output over X_in."""
    return np.array([r.value for r in output_range_results(net, X_in, directions, threads)])


def reach_results(
    system, net: ReluNetwork, X_in: Polytope, k: int, directions, threads: int = 1
) -> list[BnbResult]:
    return _solve_directions(
        lambda d: encode_reach(system, net, X_in, k, d), directions, threads
    )


def reach_set(
    system, net: ReluNetwork, X_in: Polytope, k: int, directions, threads: int = 1
) -> np.ndarray:
    """Exact per-direction maxima of the k-step closed-loop state over X_in."""
    return np.array(
        [r.value for r in reach_results(system, net, X_in, k, directions, threads)]
    )


def dump_lp_text(m: MilpModel) -> str:
    """Plain-text rendering of a model for cross-checks with external solvers."""
    lines = ["maximize"]
    terms = " + ".join(f"{c!r} x{i}" for i, c in enumerate(m.c) if c != 0.0)
    lines.append("  " + (terms or "0"))
    lines.append("subject to")
    for A, b, op in ((m.A_ub, m.b_ub, "<="), (m.A_eq, m.b_eq, "=")):
        for row, rhs in zip(A, b):
            terms = " + ".join(f"{c!r} x{i}" for i, c in enumerate(row) if c != 0.0)
            lines.append(f"  {terms} {op} {rhs!r}")
    lines.append("bounds")
    for i, (lo, hi) in enumerate(zip(m.lb, m.ub)):
        lines.append(f"  {lo!r} <= x{i} <= {hi!r}")
    lines.append("binary")
    lines.append("  " + " ".join(f"x{i}" for i in m.binaries))
    return "\n".join(lines) + "\n"
