"""ReLU network model and its piecewise-affine structure.

A network is a list of (W, b) layers: hidden layers with ReLU activation
followed by one affine output layer.  Fixing which ReLUs are active (an
activation pattern, one binary per hidden neuron) turns the network into a
single affine map valid on a polytopic region of the input space; the
functions below extract that affine map, the region, the pattern realized at
a point, and build two derived controllers: an output-saturated network that
respects box input constraints everywhere, and a retrofit whose output layer
is minimally modified so the equilibrium-region feedback equals -K x.

Ties (pre-activation exactly zero) count as active; this matters only on
measure-zero boundaries but fixes which closed region a boundary point
belongs to.
"""

from __future__ import annotations

import json

import numpy as np

from certnn import numerics
from certnn.polytope import Polytope, is_empty, remove_redundant

# An activation pattern is one 0/1 vector per hidden layer.
Pattern = tuple[np.ndarray, ...]


class DimensionMismatch(Exception):
    pass


class EmptyRegion(Exception):
    """The requested activation pattern is not realized by any input."""


class InvalidBounds(Exception):
    pass


class RankDeficient(Exception):
    """The retrofit equality system violates one of its rank requirements."""


class ReluNetwork:
    """Feed-forward ReLU network: hidden layers plus an affine output layer."""

    def __init__(self, layers):
        if len(layers) < 2:
            raise ValueError("need at least one hidden layer and an output layer")
        checked = []
        prev = None
        for W, b in layers:
            W = np.asarray(W, dtype=float)
            b = np.asarray(b, dtype=float).reshape(-1)
            if W.ndim != 2 or W.shape[0] != b.size:
                raise ValueError(f"layer shape mismatch: W {W.shape}, b {b.shape}")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise ValueError("layer entries must be finite")
            if prev is not None and W.shape[1] != prev:
                raise ValueError(f"layer input width {W.shape[1]} does not chain with {prev}")
            prev = W.shape[0]
            checked.append((W, b))
        self.layers = checked

    @property
    def n_x(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def n_u(self) -> int:
        return self.layers[-1][0].shape[0]

    @property
    def n_hidden_layers(self) -> int:
        return len(self.layers) - 1

    @property
    def hidden_widths(self) -> list[int]:
        return [W.shape[0] for W, _ in self.layers[:-1]]

    def eval(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.n_x:
            raise DimensionMismatch(f"input length {x.size}, expected {self.n_x}")
        xi = x
        for W, b in self.layers[:-1]:
            xi = np.maximum(W @ xi + b, 0.0)
        W, b = self.layers[-1]
        return W @ xi + b

    def activation_pattern(self, x) -> Pattern:
        """Per-neuron activity at x; pre-activation >= 0 counts as active."""
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.n_x:
            raise DimensionMismatch(f"input length {x.size}, expected {self.n_x}")
        gammas = []
        xi = x
        for W, b in self.layers[:-1]:
            pre = W @ xi + b
            gammas.append((pre >= 0.0).astype(np.int8))
            xi = np.maximum(pre, 0.0)
        return tuple(gammas)

    def _check_pattern(self, pattern: Pattern):
        widths = self.hidden_widths
        if len(pattern) != len(widths) or any(
            np.asarray(p).size != w for p, w in zip(pattern, widths)
        ):
            raise DimensionMismatch("pattern does not match hidden layer widths")

    def affine_map(self, pattern: Pattern, l: int) -> tuple[np.ndarray, np.ndarray]:
        """(W, b) with network-through-layer-l == W x + b under the pattern.

        For l <= L the mask of layer l is included; for l = L+1 the affine
        output layer is applied on top of the fully masked hidden stack.
        """
        self._check_pattern(pattern)
        L = self.n_hidden_layers
        if not 1 <= l <= L + 1:
            raise ValueError(f"layer index {l} out of range 1..{L + 1}")
        W_acc = np.eye(self.n_x)
        b_acc = np.zeros(self.n_x)
        for i in range(min(l, L)):
            W, b = self.layers[i]
            W_acc = W @ W_acc
            b_acc = W @ b_acc + b
            mask = np.asarray(pattern[i], dtype=float)
            W_acc = mask[:, None] * W_acc
            b_acc = mask * b_acc
        if l == L + 1:
            W, b = self.layers[-1]
            W_acc = W @ W_acc
            b_acc = W @ b_acc + b
        return W_acc, b_acc

    def preactivation_affine(self, pattern: Pattern, l: int) -> tuple[np.ndarray, np.ndarray]:
        """Affine map from input to layer l's pre-activation under the pattern."""
        self._check_pattern(pattern)
        L = self.n_hidden_layers
        if not 1 <= l <= L:
            raise ValueError(f"hidden layer index {l} out of range 1..{L}")
        W, b = self.layers[l - 1]
        if l == 1:
            return W.copy(), b.copy()
        W_prev, b_prev = self.affine_map(pattern, l - 1)
        return W @ W_prev, W @ b_prev + b

    def region_of_pattern(self, pattern: Pattern) -> Polytope:
        """Closed region where the pattern is realized, as an irredundant polytope.

        Active neurons contribute pre(x) >= 0, inactive ones the closure
        pre(x) <= 0, so the region equals the closure of {x : G(x) = pattern}.
        Raises EmptyRegion when the stacked system is infeasible.
        """
        self._check_pattern(pattern)
        rows = []
        rhs = []
        for l in range(1, self.n_hidden_layers + 1):
            V, c = self.preactivation_affine(pattern, l)
            gamma = np.asarray(pattern[l - 1])
            for j in range(gamma.size):
                if gamma[j]:
                    rows.append(-V[j])
                    rhs.append(c[j])
                else:
                    rows.append(V[j])
                    rhs.append(-c[j])
        region = Polytope(np.array(rows), np.array(rhs))
        if is_empty(region):
            raise EmptyRegion("activation pattern is unrealizable")
        return remove_redundant(region)

    def equilibrium_region(self) -> tuple[Pattern, Polytope]:
        """Pattern at the origin and the polytopic region where it holds."""
        gamma = self.activation_pattern(np.zeros(self.n_x))
        region = self.region_of_pattern(gamma)
        return gamma, region

    def max_patterns(self) -> int:
        """Upper bound 2^(total hidden neurons) on distinct activation patterns."""
        return 2 ** sum(self.hidden_widths)

    def to_json(self) -> dict:
        return {
            "layers": [{"W": W.tolist(), "b": b.tolist()} for W, b in self.layers]
        }

    @staticmethod
    def from_json(data: dict) -> "ReluNetwork":
        return ReluNetwork(
            [(np.asarray(l["W"], dtype=float), np.asarray(l["b"], dtype=float)) for l in data["layers"]]
        )

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_json(), f, indent=1)
            f.write("\n")

    @staticmethod
    def load(path) -> "ReluNetwork":
        with open(path) as f:
            return ReluNetwork.from_json(json.load(f))


def saturate(net: ReluNetwork, lb, ub) -> ReluNetwork:
    """Append two ReLU stages clamping the output into the box [lb, ub].

    The construction max(-max(-u + ub, 0) + ub - lb, 0) + lb leaves feasible
    outputs unchanged and saturates the rest, so the result satisfies the box
    input constraints for every state.
    """
    lb = np.asarray(lb, dtype=float).reshape(-1)
    ub = np.asarray(ub, dtype=float).reshape(-1)
    if lb.size != net.n_u or ub.size != net.n_u:
        raise DimensionMismatch("bound length does not match output width")
    if np.any(lb >= ub):
        raise InvalidBounds("need lb < ub componentwise")
    W_out, b_out = net.layers[-1]
    eye = np.eye(net.n_u)
    layers = list(net.layers[:-1])
    layers.append((-W_out, ub - b_out))
    layers.append((-eye, ub - lb))
    layers.append((eye, lb))
    return ReluNetwork(layers)


def retrofit_lqr(net: ReluNetwork, K) -> tuple[ReluNetwork, float]:
    """Minimally change the output layer so the equilibrium feedback is -K x.

    Solves the strictly convex QP
        min ||W_new - W_out||_F^2 + ||b_new - b_out||^2
        s.t. W_new @ W_eq = -K,  W_new @ b_eq + b_new = 0,
    where (W_eq, b_eq) is the affine map of the hidden stack under the
    activation pattern at the origin.  The hidden layers (and hence all
    activation regions) are untouched.  Returns the new network and the
    objective value at the optimum.
    """
    K = np.asarray(K, dtype=float).reshape(net.n_u, net.n_x)
    gamma = net.activation_pattern(np.zeros(net.n_x))
    W_eq, b_eq = net.affine_map(gamma, net.n_hidden_layers)
    W_out, b_out = net.layers[-1]
    n_u, n_L = W_out.shape

    # Solvability of W_new @ W_eq = -K alone (block-diagonal system in the
    # stacked rows of W_new).
    A_w = np.kron(np.eye(n_u), W_eq.T)
    b_w = (-K).reshape(-1)
    rank_a = np.linalg.matrix_rank(A_w)
    if np.linalg.matrix_rank(np.column_stack([A_w, b_w])) > rank_a:
        raise RankDeficient("gain equation inconsistent: rank([Aeq | beq]) > rank(Aeq)")
    if n_u * n_L < rank_a:
        raise RankDeficient("too few output-layer weights: n_u * n_L < rank(Aeq)")

    # Full system over [vec(W_new rows); b_new]: gain rows plus bias rows.
    n_vars = n_u * n_L + n_u
    A_full = np.zeros((n_u * net.n_x + n_u, n_vars))
    b_full = np.zeros(n_u * net.n_x + n_u)
    A_full[: n_u * net.n_x, : n_u * n_L] = A_w
    b_full[: n_u * net.n_x] = b_w
    for i in range(n_u):
        A_full[n_u * net.n_x + i, i * n_L : (i + 1) * n_L] = b_eq
        A_full[n_u * net.n_x + i, n_u * n_L + i] = 1.0
    target = np.concatenate([W_out.reshape(-1), b_out])
    sol = numerics.eq_constrained_lsq(np.eye(n_vars), target, A_full, b_full)
    W_new = sol[: n_u * n_L].reshape(n_u, n_L)
    b_new = sol[n_u * n_L :]
    cost = float(np.sum((sol - target) ** 2))
    return ReluNetwork(list(net.layers[:-1]) + [(W_new, b_new)]), cost


def synth_satlqr(K, lb, ub, radius: float = 10.0) -> ReluNetwork:
    """Saturated-LQR test network: clamp(-K x, lb, ub) on the box |x_i| <= radius.

    The hidden layer carries one shifted pair (x_i + radius, -x_i + radius)
    per state; inside the box both halves are active, the pair difference
    reconstructs 2 x_i, and the output layer -K/2 recombines them into -K x
    with zero bias.  The shift keeps the equilibrium activation region
    full-dimensional.  Saturation per the box bounds is then appended.
    """
    K = np.asarray(K, dtype=float)
    if K.ndim == 1:
        K = K.reshape(1, -1)
    n_u, n_x = K.shape
    W1 = np.zeros((2 * n_x, n_x))
    for i in range(n_x):
        W1[2 * i, i] = 1.0
        W1[2 * i + 1, i] = -1.0
    b1 = np.full(2 * n_x, float(radius))
    W2 = np.zeros((n_u, 2 * n_x))
    for j in range(n_u):
        for i in range(n_x):
            W2[j, 2 * i] = -K[j, i] / 2.0
            W2[j, 2 * i + 1] = K[j, i] / 2.0
    b2 = np.zeros(n_u)
    return saturate(ReluNetwork([(W1, b1), (W2, b2)]), lb, ub)
