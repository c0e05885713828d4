import csv
import json

import numpy as np
import pytest

from conftest import CASE_A, CASE_B, CASE_C_IN, CASE_K, CASE_Q, CASE_R, CASE_c_IN
from certnn.cli import main
from certnn.network import ReluNetwork, synth_satlqr
from certnn.polytope import Polytope


@pytest.fixture
def case_files(tmp_path):
    system = {
        "A": CASE_A.tolist(),
        "B": CASE_B.tolist(),
        "X": Polytope.box([-5.0, -5.0], [5.0, 5.0]).to_json(),
        "U_box": {"lb": [-1.0], "ub": [1.0]},
        "Q": CASE_Q.tolist(),
        "R": CASE_R.tolist(),
    }
    sys_path = tmp_path / "system.json"
    sys_path.write_text(json.dumps(system))

    # use the gain computed from (Q, R) so the LQR-match check is exact
    from certnn.control import LtiSystem, lqr

    K = lqr(LtiSystem(CASE_A, CASE_B), CASE_Q, CASE_R).K
    net = synth_satlqr(K, [-1.0], [1.0])
    net_path = tmp_path / "network.json"
    net.save(net_path)

    xin = Polytope(CASE_C_IN, 0.999 * CASE_c_IN)
    xin_path = tmp_path / "xin.json"
    xin_path.write_text(json.dumps(xin.to_json()))
    return str(sys_path), str(net_path), str(xin_path), tmp_path


def test_verify_certifies_case_study(case_files, capsys):
    sys_path, net_path, xin_path, tmp = case_files
    out = tmp / "out"
    code = main(
        [
            "verify", "--system", sys_path, "--network", net_path,
            "--xin", xin_path, "--out-dir", str(out), "--kmax", "10",
        ]
    )
    assert code == 0
    printed = capsys.readouterr().out
    assert "verdict: LqrOptimalNearEq" in printed
    cert = json.loads((out / "certificate.json").read_text())
    assert cert["verdict"] == "LqrOptimalNearEq"
    assert cert["stability"]["k_star"] <= 10


def test_verify_failure_exit_code(case_files, tmp_path):
    sys_path, net_path, _, tmp = case_files
    # an initial set too large for invariance
    big = tmp_path / "big.json"
    big.write_text(json.dumps(Polytope.box([-5.0, -5.0], [5.0, 5.0]).to_json()))
    code = main(
        [
            "verify", "--system", sys_path, "--network", net_path,
            "--xin", str(big), "--out-dir", str(tmp / "out2"), "--kmax", "1",
        ]
    )
    assert code == 2


def test_missing_file_exit_code(case_files, tmp_path):
    sys_path, net_path, xin_path, tmp = case_files
    code = main(
        [
            "verify", "--system", str(tmp_path / "nope.json"), "--network", net_path,
            "--xin", xin_path, "--out-dir", str(tmp / "out3"),
        ]
    )
    assert code == 1


def test_dimension_mismatch_exit_code(case_files, tmp_path):
    sys_path, _, xin_path, tmp = case_files
    bad_net = ReluNetwork(
        [(np.ones((2, 3)), np.zeros(2)), (np.ones((1, 2)), np.zeros(1))]
    )
    bad_path = tmp_path / "bad_net.json"
    bad_net.save(bad_path)
    code = main(
        [
            "verify", "--system", sys_path, "--network", str(bad_path),
            "--xin", xin_path, "--out-dir", str(tmp / "out4"),
        ]
    )
    assert code == 1


def test_retrofit_outputs_network(case_files, capsys):
    sys_path, net_path, _, tmp = case_files
    out = tmp / "retro"
    code = main(
        ["retrofit", "--system", sys_path, "--network", net_path, "--out-dir", str(out)]
    )
    assert code == 0
    assert "retrofit cost:" in capsys.readouterr().out
    new_net = ReluNetwork.load(out / "network_retrofit.json")
    # equilibrium feedback now matches the LQR gain from the system file
    from certnn.control import LtiSystem, lqr
    from certnn.verify import equilibrium_gain_bias

    K = lqr(LtiSystem(CASE_A, CASE_B), CASE_Q, CASE_R).K
    gain, bias = equilibrium_gain_bias(new_net)
    np.testing.assert_allclose(gain, -K, atol=1e-8)
    np.testing.assert_allclose(bias, 0.0, atol=1e-8)


def test_saturate_outputs_clamped_network(case_files):
    sys_path, _, _, tmp = case_files
    # an unclamped linear-feedback net
    raw = ReluNetwork(
        [
            (np.vstack([np.eye(2), -np.eye(2)]), np.full(4, 10.0)),
            (np.hstack([-CASE_K / 2.0, CASE_K / 2.0]).reshape(1, 4), np.zeros(1)),
        ]
    )
    raw_path = tmp / "raw.json"
    raw.save(raw_path)
    out = tmp / "sat"
    code = main(
        ["saturate", "--system", sys_path, "--network", str(raw_path), "--out-dir", str(out)]
    )
    assert code == 0
    sat = ReluNetwork.load(out / "network_saturated.json")
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = rng.uniform(-8, 8, 2)
        np.testing.assert_allclose(sat.eval(x), np.clip(raw.eval(x), -1, 1), atol=1e-9)


def test_regions_outputs(case_files, capsys):
    sys_path, net_path, xin_path, tmp = case_files
    out = tmp / "regions"
    code = main(
        [
            "regions", "--system", sys_path, "--network", net_path,
            "--xin", xin_path, "--out-dir", str(out),
        ]
    )
    assert code == 0
    data = json.loads((out / "regions.json").read_text())
    assert len(data) >= 1
    printed = capsys.readouterr().out
    assert f"regions: {len(data)}" in printed
    with open(out / "regions.csv") as f:
        header = next(csv.reader(f))
    assert header == ["region", "x1", "x2"]


def test_simulate_outputs_trajectory(case_files):
    sys_path, net_path, _, tmp = case_files
    out = tmp / "sim"
    code = main(
        [
            "simulate", "--system", sys_path, "--network", net_path,
            "--out-dir", str(out), "--x0", "0.5,-0.5", "--steps", "20",
        ]
    )
    assert code == 0
    with open(out / "trajectory.csv") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["step", "x1", "x2", "u1"]
    assert len(rows) == 22  # header + 21 states
    assert float(rows[1][1]) == pytest.approx(0.5)


def test_simulate_bad_x0(case_files):
    sys_path, net_path, _, tmp = case_files
    code = main(
        [
            "simulate", "--system", sys_path, "--network", net_path,
            "--out-dir", str(tmp / "simbad"), "--x0", "1.0", "--steps", "5",
        ]
    )
    assert code == 1


def test_sets_outputs(case_files):
    sys_path, net_path, xin_path, tmp = case_files
    out = tmp / "sets"
    code = main(
        [
            "sets", "--system", sys_path, "--network", net_path,
            "--xin", xin_path, "--out-dir", str(out), "--kmax", "10",
        ]
    )
    assert code == 0
    for name in ("r_lqr", "r_eq", "r_as", "x1_out", "xk_out"):
        assert (out / f"{name}.json").exists()
        assert (out / f"{name}.csv").exists()
    r_as = Polytope.from_json(json.loads((out / "r_as.json").read_text()))
    assert r_as.contains_point([0.0, 0.0])
