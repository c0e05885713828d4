"""Certification pipeline for a network-controlled LTI system.

The full chain: input-constraint check (output range vs U), one-step
control-invariance of the initial set, the two stability conditions at the
equilibrium region (zero resulting bias, stable equilibrium-region closed
loop), construction of the stability set R_as, and a search for the smallest
horizon k at which the k-step reachable set is certified inside R_as.  The
reach queries in the final step use the facets of R_as itself as directions,
so containment is a componentwise comparison rather than an
over-approximation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from certnn import milp, numerics
from certnn.control import LtiSystem, lqr_admissible_set
from certnn.network import ReluNetwork
from certnn.polytope import EmptyInput, Polytope, intersect, is_empty, max_positively_invariant

RESIDUAL_TOL = 1e-6
CONTAIN_TOL = 1e-9


class EmptyStabilitySet(Exception):
    pass


class Verdict:
    INPUT_ONLY = "InputOnly"
    INVARIANT = "Invariant"
    ASYMPTOTICALLY_STABLE = "AsymptoticallyStable"
    LQR_OPTIMAL_NEAR_EQ = "LqrOptimalNearEq"
    FAILED = "Failed"


@dataclass
class StabilityReport:
    bias_residual: float
    spectral_radius: float
    lqr_match_residual: float | None = None
    R_eq: Polytope | None = None
    R_as: Polytope | None = None
    k_star: int | None = None
    X_k_out: Polytope | None = None


@dataclass
class Certificate:
    """Machine-readable verdict of the verification pipeline."""

    verdict: str
    reason: str | None = None
    input_ok: bool = False
    invariance_ok: bool = False
    U_star: Polytope | None = None
    X_1_out: Polytope | None = None
    stability: StabilityReport | None = None
    witnesses: list[np.ndarray] = field(default_factory=list)
    milp_nodes: int = 0

    @property
    def certified(self) -> bool:
        return self.verdict in (Verdict.ASYMPTOTICALLY_STABLE, Verdict.LQR_OPTIMAL_NEAR_EQ)

    def to_json(self) -> dict:
        def poly(p):
            return p.to_json() if p is not None else None

        out = {
            "verdict": self.verdict,
            "reason": self.reason,
            "input_ok": self.input_ok,
            "invariance_ok": self.invariance_ok,
            "U_star": poly(self.U_star),
            "X_1_out": poly(self.X_1_out),
            "stability": None,
            "witnesses": [w.tolist() for w in self.witnesses],
            "milp_nodes": self.milp_nodes,
        }
        if self.stability is not None:
            s = self.stability
            out["stability"] = {
                "bias_residual": s.bias_residual,
                "spectral_radius": s.spectral_radius,
                "lqr_match_residual": s.lqr_match_residual,
                "R_eq": poly(s.R_eq),
                "R_as": poly(s.R_as),
                "k_star": s.k_star,
                "X_k_out": poly(s.X_k_out),
            }
        return out


def verify_input(
    net: ReluNetwork, X_in: Polytope, U: Polytope, threads: int = 1
) -> tuple[bool, Polytope]:
    """Exact output-range check of the controller against the input constraints.

    Returns (ok, U_star) where U_star = {u : F_U u <= c*} collects the
    per-facet maxima; ok iff c* <= g_U componentwise, i.e. U_star is inside U.
    """
    results = milp.output_range_results(net, X_in, U.F, threads)
    c_star = np.array([r.value for r in results])
    ok = bool(np.all(c_star <= U.g + CONTAIN_TOL))
    return ok, Polytope(U.F.copy(), c_star)


def verify_invariance(
    sys: LtiSystem, net: ReluNetwork, X_in: Polytope, U: Polytope, threads: int = 1
) -> tuple[bool, Polytope, list[np.ndarray]]:
    """One-step admissible control-invariance of X_in.

    True iff the input check passes and the one-step reachable set, bounded
    along the facets of X_in itself, stays inside X_in.  When a facet check
    fails, the MILP incumbent provides a concrete witness x0 in X_in whose
    one-step image violates that facet; all witnesses are returned.
    """
    input_ok, _ = verify_input(net, X_in, U, threads)
    results = milp.reach_results(sys, net, X_in, 1, X_in.F, threads)
    c_star = np.array([r.value for r in results])
    # x0 is always the first block of model variables (see encode_reach).
    witnesses = [
        r.point[: sys.n_x]
        for r, violated in zip(results, c_star > X_in.g + CONTAIN_TOL)
        if violated
    ]
    ok = input_ok and bool(np.all(c_star <= X_in.g + CONTAIN_TOL))
    return ok, Polytope(X_in.F.copy(), c_star), witnesses


def equilibrium_gain_bias(net: ReluNetwork) -> tuple[np.ndarray, np.ndarray]:
    """(W_out @ W_eq, W_out @ b_eq + b_out): the affine feedback at the origin's region."""
    gamma = net.activation_pattern(np.zeros(net.n_x))
    W_eq, b_eq = net.affine_map(gamma, net.n_hidden_layers)
    W_out, b_out = net.layers[-1]
    return W_out @ W_eq, W_out @ b_eq + b_out


def check_stability_conditions(
    sys: LtiSystem, net: ReluNetwork, K_ref=None
) -> tuple[float, float, float | None]:
    """Residuals of the two stability conditions (and the optional LQR match).

    Returns (bias_residual, rho, lqr_match_residual): the sup-norm of the
    resulting network bias at the equilibrium region, the spectral radius of
    the closed loop under the equilibrium-region gain, and, when K_ref is
    given, the sup-norm gap between that gain and -K_ref.
    """
    gain, bias = equilibrium_gain_bias(net)
    bias_residual = float(np.max(np.abs(bias), initial=0.0))
    rho = numerics.spectral_radius(sys.A + sys.B @ gain)
    match = None
    if K_ref is not None:
        K_ref = np.asarray(K_ref, dtype=float).reshape(net.n_u, net.n_x)
        match = float(np.max(np.abs(gain + K_ref)))
    return bias_residual, rho, match


def stability_set(sys: LtiSystem, net: ReluNetwork, X: Polytope, U: Polytope) -> Polytope:
    """Invariant set R_as inside R_eq intersected with the admissible region R_K.

    R_K is the maximal admissible invariant set of the equilibrium-region
    feedback; the returned set is positively invariant under that feedback and
    contains the origin.
    """
    gain, _ = equilibrium_gain_bias(net)
    K_net = -gain
    _, R_eq = net.equilibrium_region()
    try:
        R_K = lqr_admissible_set(sys, K_net, X, U)
    except EmptyInput as exc:
        raise EmptyStabilitySet("admissible region of the equilibrium feedback is empty") from exc
    base = intersect(R_eq, R_K)
    if is_empty(base):
        raise EmptyStabilitySet("R_eq and R_K do not intersect")
    return max_positively_invariant(sys.A - sys.B @ K_net, base)


def verify_stability(
    sys: LtiSystem,
    net: ReluNetwork,
    X_in: Polytope,
    X: Polytope,
    U: Polytope,
    k_max: int = 25,
    K_ref=None,
    tol: float = RESIDUAL_TOL,
    threads: int = 1,
) -> Certificate:
    """Full certificate: constraint satisfaction plus asymptotic stability.

    Pipeline: input check, one-step invariance of X_in, stability conditions
    at the equilibrium region, construction of R_as, then a linear search for
    the first k <= k_max with the k-step reachable set certified inside R_as
    (directions = facets of R_as, so containment is componentwise).
    """
    nodes = 0
    input_results = milp.output_range_results(net, X_in, U.F, threads)
    nodes += sum(r.nodes for r in input_results)
    c_u = np.array([r.value for r in input_results])
    input_ok = bool(np.all(c_u <= U.g + CONTAIN_TOL))
    U_star = Polytope(U.F.copy(), c_u)

    inv_results = milp.reach_results(sys, net, X_in, 1, X_in.F, threads)
    nodes += sum(r.nodes for r in inv_results)
    c_1 = np.array([r.value for r in inv_results])
    invariance_ok = input_ok and bool(np.all(c_1 <= X_in.g + CONTAIN_TOL))
    X_1 = Polytope(X_in.F.copy(), c_1)

    bias_residual, rho, match = check_stability_conditions(sys, net, K_ref)
    report = StabilityReport(
        bias_residual=bias_residual, spectral_radius=rho, lqr_match_residual=match
    )
    cert = Certificate(
        verdict=Verdict.FAILED,
        input_ok=input_ok,
        invariance_ok=invariance_ok,
        U_star=U_star,
        X_1_out=X_1,
        stability=report,
        milp_nodes=nodes,
    )

    def fallback(reason: str) -> Certificate:
        if invariance_ok:
            cert.verdict = Verdict.INVARIANT
        elif input_ok:
            cert.verdict = Verdict.INPUT_ONLY
        else:
            cert.verdict = Verdict.FAILED
        cert.reason = reason
        return cert

    if not input_ok:
        cert.reason = "input constraint violation"
        return cert
    if bias_residual > tol:
        return fallback("bias annihilation")
    if rho >= 1.0:
        return fallback("equilibrium-region closed loop not stable")
    try:
        _, R_eq = net.equilibrium_region()
        report.R_eq = R_eq
        R_as = stability_set(sys, net, X, U)
        report.R_as = R_as
    except EmptyStabilitySet:
        return fallback("empty stability set")

    for k in range(1, k_max + 1):
        results = milp.reach_results(sys, net, X_in, k, R_as.F, threads)
        cert.milp_nodes += sum(r.nodes for r in results)
        c_k = np.array([r.value for r in results])
        if np.all(c_k <= R_as.g + CONTAIN_TOL):
            report.k_star = k
            report.X_k_out = Polytope(R_as.F.copy(), c_k)
            break
    if report.k_star is None:
        return fallback(f"no k <= {k_max} with reachable set inside R_as")

    if not invariance_ok:
        return fallback("one-step invariance of X_in failed")
    if match is not None and match <= tol:
        cert.verdict = Verdict.LQR_OPTIMAL_NEAR_EQ
    else:
        cert.verdict = Verdict.ASYMPTOTICALLY_STABLE
    cert.reason = None
    return cert
