"""Command-line front end.

Subcommands: verify | retrofit | saturate | regions | simulate | sets.
Inputs are JSON files (system, network, initial-set polytope); outputs are
JSON and CSV files in --out-dir.  Exit codes: 0 when the certificate verdict
is a stability certificate, 2 when verification fails, 1 on I/O or
validation errors.  Set CERTNN_LOG to error/info/debug to control logging.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from certnn import control, verify
from certnn.network import ReluNetwork, retrofit_lqr, saturate
from certnn.polytope import Polytope, vertices_2d
from certnn.regions import enumerate_regions

log = logging.getLogger("certnn")


class ConfigError(Exception):
    pass


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _setup_logging():
    level = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("CERTNN_LOG", "error").lower(), logging.ERROR
    )
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _load_json(path: str) -> dict:
    try:
        with open(path) as f:
            return json.load(f)
    except FileNotFoundError as exc:
        raise ConfigError(f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: line {exc.lineno}: {exc.msg}") from exc


def _load_inputs(args, need_network=True, need_xin=True):
    sys_obj, aux = control.system_from_json(_load_json(args.system))
    net = None
    if need_network:
        net = ReluNetwork.from_json(_load_json(args.network))
        if net.n_x != sys_obj.n_x or net.n_u != sys_obj.n_u:
            raise ConfigError(
                f"network is {net.n_x}->{net.n_u} but plant expects {sys_obj.n_x}->{sys_obj.n_u}"
            )
    xin = None
    if need_xin:
        xin = Polytope.from_json(_load_json(args.xin))
        if xin.dim != sys_obj.n_x:
            raise ConfigError(f"X_in dimension {xin.dim} does not match state size {sys_obj.n_x}")
    return sys_obj, aux, net, xin


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, data):
    with open(path, "w") as f:
        json.dump(data, f, indent=1)
        f.write("\n")


def _write_vertices_csv(path: Path, P: Polytope):
    verts = vertices_2d(P) if P.dim == 2 else np.zeros((0, P.dim))
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow([f"x{i + 1}" for i in range(P.dim)])
        for v in verts:
            w.writerow([_fmt(c) for c in v])


def _reference_gain(args, sys_obj, aux):
    if args.k_source == "lqr":
        if aux["Q"] is None or aux["R"] is None:
            raise ConfigError("k-source 'lqr' needs Q and R in the system file")
        return control.lqr(sys_obj, aux["Q"], aux["R"]).K
    data = _load_json(args.k_source)
    return np.asarray(data["K"], dtype=float)


def cmd_verify(args) -> int:
    sys_obj, aux, net, xin = _load_inputs(args)
    K_ref = None
    if aux["Q"] is not None and aux["R"] is not None:
        K_ref = control.lqr(sys_obj, aux["Q"], aux["R"]).K
    cert = verify.verify_stability(
        sys_obj, net, xin, aux["X"], aux["U"],
        k_max=args.kmax, K_ref=K_ref, tol=args.tol, threads=args.threads,
    )
    out = _out_dir(args)
    _write_json(out / "certificate.json", cert.to_json())
    print(f"verdict: {cert.verdict}" + (f" ({cert.reason})" if cert.reason else ""))
    if cert.stability and cert.stability.k_star is not None:
        print(f"k_star: {cert.stability.k_star}")
    print(f"milp nodes: {cert.milp_nodes}")
    return 0 if cert.certified else 2


def cmd_retrofit(args) -> int:
    sys_obj, aux, net, _ = _load_inputs(args, need_xin=False)
    K = _reference_gain(args, sys_obj, aux)
    new_net, cost = retrofit_lqr(net, K)
    out = _out_dir(args)
    new_net.save(out / "network_retrofit.json")
    print(f"retrofit cost: {_fmt(cost)}")
    return 0


def cmd_saturate(args) -> int:
    sys_obj, aux, net, _ = _load_inputs(args, need_xin=False)
    if aux["U_box"] is None:
        raise ConfigError("saturate needs box input constraints (U_box) in the system file")
    lb, ub = aux["U_box"]
    out = _out_dir(args)
    saturate(net, lb, ub).save(out / "network_saturated.json")
    return 0


def cmd_regions(args) -> int:
    sys_obj, aux, net, xin = _load_inputs(args)
    regions = enumerate_regions(net, xin)
    out = _out_dir(args)
    _write_json(
        out / "regions.json",
        [
            {
                "pattern": [np.asarray(g).tolist() for g in r.pattern],
                "polytope": r.polytope.to_json(),
            }
            for r in regions
        ],
    )
    with open(out / "regions.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["region", "x1", "x2"])
        if net.n_x == 2:
            for i, r in enumerate(regions):
                for v in vertices_2d(r.polytope):
                    w.writerow([i, _fmt(v[0]), _fmt(v[1])])
    print(f"regions: {len(regions)}")
    return 0


def cmd_simulate(args) -> int:
    sys_obj, aux, net, _ = _load_inputs(args, need_xin=False)
    x0 = np.array([float(v) for v in args.x0.split(",")])
    if x0.size != sys_obj.n_x:
        raise ConfigError(f"x0 has {x0.size} entries, expected {sys_obj.n_x}")
    traj = control.simulate(sys_obj, net, x0, args.steps)
    out = _out_dir(args)
    with open(out / "trajectory.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(
            ["step"]
            + [f"x{i + 1}" for i in range(sys_obj.n_x)]
            + [f"u{i + 1}" for i in range(sys_obj.n_u)]
        )
        for k, x in enumerate(traj.states):
            u = traj.inputs[k] if k < len(traj.inputs) else [""] * sys_obj.n_u
            w.writerow([k] + [_fmt(c) for c in x] + [_fmt(c) if c != "" else "" for c in u])
    return 0


def cmd_sets(args) -> int:
    sys_obj, aux, net, xin = _load_inputs(args)
    if aux["Q"] is None or aux["R"] is None:
        raise ConfigError("sets needs Q and R in the system file")
    K = control.lqr(sys_obj, aux["Q"], aux["R"]).K
    out = _out_dir(args)
    r_lqr = control.lqr_admissible_set(sys_obj, K, aux["X"], aux["U"])
    cert = verify.verify_stability(
        sys_obj, net, xin, aux["X"], aux["U"],
        k_max=args.kmax, K_ref=K, tol=args.tol, threads=args.threads,
    )
    named = {"r_lqr": r_lqr, "x1_out": cert.X_1_out}
    if cert.stability is not None:
        named["r_eq"] = cert.stability.R_eq
        named["r_as"] = cert.stability.R_as
        named["xk_out"] = cert.stability.X_k_out
    for name, poly in named.items():
        if poly is None:
            continue
        _write_json(out / f"{name}.json", poly.to_json())
        _write_vertices_csv(out / f"{name}.csv", poly)
    print(f"verdict: {cert.verdict}")
    return 0 if cert.certified else 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="certnn", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, network=True, xin=True):
        sp.add_argument("--system", required=True, help="system JSON file")
        if network:
            sp.add_argument("--network", required=True, help="network JSON file")
        if xin:
            sp.add_argument("--xin", required=True, help="initial-set polytope JSON file")
        sp.add_argument("--out-dir", default=".", help="output directory")
        sp.add_argument("--kmax", type=int, default=25)
        sp.add_argument("--tol", type=float, default=1e-6)
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--seed", type=int, default=0, help="accepted for reproducibility; the pipeline is deterministic")

    sp = sub.add_parser("verify", help="run the full certification pipeline")
    common(sp)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("retrofit", help="retrofit the output layer to a reference gain")
    common(sp, xin=False)
    sp.add_argument("--k-source", default="lqr", help="'lqr' or a JSON file with {\"K\": [[...]]}")
    sp.set_defaults(func=cmd_retrofit)

    sp = sub.add_parser("saturate", help="clamp the network output to the input box")
    common(sp, xin=False)
    sp.set_defaults(func=cmd_saturate)

    sp = sub.add_parser("regions", help="enumerate activation regions inside X_in")
    common(sp)
    sp.set_defaults(func=cmd_regions)

    sp = sub.add_parser("simulate", help="roll out the closed loop from x0")
    common(sp, xin=False)
    sp.add_argument("--x0", required=True, help="comma-separated initial state")
    sp.add_argument("--steps", type=int, default=50)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sets", help="compute and export the certification sets")
    common(sp)
    sp.set_defaults(func=cmd_sets)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
