"""Independent oracles used by the tests.

These deliberately avoid the package's MILP machinery: output ranges are
reproduced by brute-force enumeration of activation patterns (one LP per
pattern, solved directly with scipy), and reachable sets by enumeration of
pattern sequences through the plant.
"""

import itertools

import numpy as np
from scipy.optimize import linprog


def _affine_under_pattern(net, gammas):
    """(W, b) of the full network when the hidden activity is fixed to gammas."""
    W_acc = np.eye(net.n_x)
    b_acc = np.zeros(net.n_x)
    for (W, b), gamma in zip(net.layers[:-1], gammas):
        W_acc = W @ W_acc
        b_acc = W @ b_acc + b
        mask = np.asarray(gamma, dtype=float)
        W_acc = mask[:, None] * W_acc
        b_acc = mask * b_acc
    W, b = net.layers[-1]
    return W @ W_acc, W @ b_acc + b


def _pattern_rows(net, gammas):
    """Half-space rows (F, g) on the input under which gammas is realized."""
    rows, rhs = [], []
    W_acc = np.eye(net.n_x)
    b_acc = np.zeros(net.n_x)
    for (W, b), gamma in zip(net.layers[:-1], gammas):
        V = W @ W_acc
        c = W @ b_acc + b
        for j, bit in enumerate(gamma):
            if bit:
                rows.append(-V[j])
                rhs.append(c[j])
            else:
                rows.append(V[j])
                rhs.append(-c[j])
        mask = np.asarray(gamma, dtype=float)
        W_acc = mask[:, None] * V
        b_acc = mask * c
    return np.array(rows), np.array(rhs)


def _all_patterns(widths):
    for bits in itertools.product((1, 0), repeat=sum(widths)):
        out = []
        pos = 0
        for w in widths:
            out.append(np.array(bits[pos : pos + w]))
            pos += w
        yield tuple(out)


def _lp_max(c, F, g):
    """max c.x over F x <= g; returns None if infeasible, inf if unbounded."""
    res = linprog(-np.asarray(c), A_ub=F, b_ub=g, bounds=[(None, None)] * len(c), method="highs")
    if res.status == 2:
        return None
    if res.status == 3:
        return np.inf
    return -res.fun


def _feasible(F, g):
    res = linprog(
        np.zeros(F.shape[1]), A_ub=F, b_ub=g, bounds=[(None, None)] * F.shape[1], method="highs"
    )
    return res.status == 0


def output_range_oracle(net, F_in, g_in, direction):
    """max direction.N(x) over {F_in x <= g_in} by full pattern enumeration."""
    best = -np.inf
    for gammas in _all_patterns(net.hidden_widths):
        rows, rhs = _pattern_rows(net, gammas)
        F = np.vstack([F_in, rows])
        g = np.concatenate([g_in, rhs])
        if not _feasible(F, g):
            continue
        W, b = _affine_under_pattern(net, gammas)
        val = _lp_max(direction @ W, F, g)
        if val is not None:
            best = max(best, val + float(direction @ b))
    return best


def output_range_fan_oracle(net, F_in, g_in, directions):
    """Per-direction maxima over all directions with one pattern sweep."""
    directions = np.atleast_2d(directions)
    best = np.full(len(directions), -np.inf)
    for gammas in _all_patterns(net.hidden_widths):
        rows, rhs = _pattern_rows(net, gammas)
        F = np.vstack([F_in, rows])
        g = np.concatenate([g_in, rhs])
        if not _feasible(F, g):
            continue
        W, b = _affine_under_pattern(net, gammas)
        for i, d in enumerate(directions):
            val = _lp_max(d @ W, F, g)
            if val is not None:
                best[i] = max(best[i], val + float(d @ b))
    return best


def reach_oracle(A, B, net, F_in, g_in, k, direction):
    """max direction.x_k over k closed-loop steps by pattern-sequence enumeration.

    All constraints are affine in x0 once the activation pattern of every step
    is fixed; infeasible prefixes are pruned (this only skips empty branches,
    the enumeration stays exhaustive).
    """
    best = -np.inf

    def descend(step, F, g, W_state, b_state):
        nonlocal best
        if step == k:
            val = _lp_max(direction @ W_state, F, g)
            if val is not None and np.isfinite(val):
                best = max(best, val + float(direction @ b_state))
            return
        for gammas in _all_patterns(net.hidden_widths):
            rows, rhs = _pattern_rows(net, gammas)
            F_new = np.vstack([F, rows @ W_state])
            g_new = np.concatenate([g, rhs - rows @ b_state])
            if not _feasible(F_new, g_new):
                continue
            W_u, b_u = _affine_under_pattern(net, gammas)
            W_next = A @ W_state + B @ (W_u @ W_state)
            b_next = A @ b_state + B @ (W_u @ b_state + b_u)
            descend(step + 1, F_new, g_new, W_next, b_next)

    n_x = A.shape[0]
    descend(0, F_in, g_in, np.eye(n_x), np.zeros(n_x))
    return best


def sample_polytope(rng, F, g, n, lo, hi, max_tries=200000):
    """Rejection-sample n points of {F x <= g} from the box [lo, hi]."""
    pts = []
    dim = F.shape[1]
    for _ in range(max_tries):
        batch = rng.uniform(lo, hi, size=(max(64, n), dim))
        ok = np.all(batch @ F.T <= g + 1e-12, axis=1)
        pts.extend(batch[ok])
        if len(pts) >= n:
            return np.array(pts[:n])
    raise RuntimeError("rejection sampling failed")


def batch_eval(net, X):
    """Evaluate the network on rows of X at once."""
    Z = np.asarray(X, dtype=float)
    for W, b in net.layers[:-1]:
        Z = np.maximum(Z @ W.T + b, 0.0)
    W, b = net.layers[-1]
    return Z @ W.T + b
