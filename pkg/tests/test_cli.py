import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from hfbeam import cli
from hfbeam.medium import Branch, ConstantSpeed
from hfbeam.beams import make_initial_state, propagate
from hfbeam.presets import preset_initial_data
from hfbeam.synthesis import BranchAmplitude


def run_cli(args):
    return cli.main(args)


def test_invalid_order_exits_2(tmp_path, capsys):
    cfgf = tmp_path / "c.json"
    cfgf.write_text(json.dumps({"order": 3, "epsilon": 0.01}))
    rc = run_cli(["propagate", "--config", str(cfgf), "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "order" in capsys.readouterr().err


def test_unknown_key_exits_2(tmp_path, capsys):
    cfgf = tmp_path / "c.json"
    cfgf.write_text(json.dumps({"bogus_key": 1}))
    rc = run_cli(["superpose", "--config", str(cfgf)])
    assert rc == 2
    assert "bogus_key" in capsys.readouterr().err


def test_negative_eps_exits_2(tmp_path, capsys):
    rc = run_cli(["superpose", "--eps", "-0.5", "--out", str(tmp_path / "o")])
    assert rc == 2


def test_propagate_writes_trajectory(tmp_path):
    cfg = {"medium": {"kind": "constant", "c0": 1.0, "n": 1},
           "initial_data": {"preset": "chirp1d"},
           "epsilon": 0.02, "T": 0.5, "x0": [0.5],
           "out_dir": str(tmp_path / "run")}
    cfgf = tmp_path / "c.json"
    cfgf.write_text(json.dumps(cfg))
    rc = run_cli(["propagate", "--config", str(cfgf)])
    assert rc == 0
    traj = (tmp_path / "run" / "trajectory.csv").read_text().splitlines()
    header = [l for l in traj if not l.startswith("#")][0]
    assert header.split(",")[:4] == ["t", "x0", "p0", "S"]
    manifest = json.loads((tmp_path / "run" / "manifest.json").read_text())
    assert manifest["command"] == "propagate"
    assert manifest["engine"] in ("numba", "numpy")
    assert manifest["config"]["epsilon"] == 0.02


def test_superpose_deterministic_outputs(tmp_path):
    cfg = {"medium": {"kind": "constant", "c0": 1.0, "n": 1},
           "initial_data": {"preset": "plane1d"},
           "epsilon": 0.02, "t": 0.0}
    bodies = []
    for sub in ("a", "b"):
        c = dict(cfg, out_dir=str(tmp_path / sub))
        cfgf = tmp_path / f"{sub}.json"
        cfgf.write_text(json.dumps(c))
        assert run_cli(["superpose", "--config", str(cfgf)]) == 0
        bodies.append((tmp_path / sub / "wavefield.csv").read_bytes())
    assert bodies[0] == bodies[1]


def test_convergence_command_summary(tmp_path):
    cfg = {"medium": {"kind": "constant", "c0": 1.0, "n": 1},
           "initial_data": {"preset": "chirp1d"},
           "epsilons": [1 / 25, 1 / 50], "T": 0.3, "nt": 2,
           "bands": {"energy": [0.3, 1.5]},
           "out_dir": str(tmp_path / "conv")}
    cfgf = tmp_path / "c.json"
    cfgf.write_text(json.dumps(cfg))
    assert run_cli(["convergence", "--config", str(cfgf)]) == 0
    rows = [l for l in (tmp_path / "conv" / "conv_report.csv").read_text().splitlines()
            if l and not l.startswith("#")]
    assert rows[0].split(",") == ["eps", "e0_E", "eT_E", "residual_L2",
                                  "lemma31_lhs", "lemma31_rhs"]
    assert len(rows) == 3
    summary = json.loads((tmp_path / "conv" / "summary.json").read_text())
    assert summary["lemma31_ok"] is True
    assert summary["energy_band_pass"] is True


def test_spherical_example_single_eps(tmp_path):
    out = tmp_path / "sph"
    rc = run_cli(["spherical-example", "--eps", "0.04", "--t", "0.5",
                  "--out", str(out)])
    assert rc == 0
    lines = (out / "caustic_table.csv").read_text().splitlines()
    header = [l for l in lines if not l.startswith("#")][0]
    assert header.startswith("eps,re_ugb,im_ugb,re_gprime,im_gprime")
    row = [float(v) for v in lines[-1].split(",")]
    # eps * |u_gb - g'| is small compared with eps * |g'| ~ |f|
    assert row[6] < 0.5


def test_eulerian_command(tmp_path):
    cfg = {"medium": {"kind": "constant", "c0": 1.0, "n": 1},
           "initial_data": {"preset": "plane1d"},
           "epsilon": 0.02, "t": 0.25,
           "phase_grid": {"x_range": [-2.2, 2.2], "nx": 551,
                          "p_range": [0.4, 1.6], "np": 111},
           "out_dir": str(tmp_path / "eul")}
    cfgf = tmp_path / "c.json"
    cfgf.write_text(json.dumps(cfg))
    assert run_cli(["eulerian", "--config", str(cfgf)]) == 0
    for name in ("bundle_plus.csv", "bundle_minus.csv", "wavefield.csv", "manifest.json"):
        assert (tmp_path / "eul" / name).exists()
    head = (tmp_path / "eul" / "bundle_plus.csv").read_text().splitlines()
    cols = [l for l in head if not l.startswith("#")][0]
    assert cols == "x,p,phi1,w,S,reA,imA,reM,imM"


def test_console_entry_point_help():
    out = subprocess.run([sys.executable, "-m", "hfbeam.cli", "--help"],
                         capture_output=True, text=True,
                         env={"PYTHONPATH": str(Path(__file__).resolve().parents[1] / "src"),
                              "PATH": "/usr/bin:/bin:/usr/local/bin"})
    assert out.returncode == 0
    assert "spherical-example" in out.stdout


# ------------------------------------------------------------------ presets

def test_preset_plane_gradient_everywhere():
    data = preset_initial_data("plane1d")
    xs = np.linspace(-3, 3, 17)[:, None]
    assert np.allclose(np.asarray(data.S.grad(xs)), 1.0)


def test_preset_chirp_ray_crossing_time():
    """Opposite-side rays of the chirp cross at t = |x0| (derived from
    dx/dt = sign(p), p0 = -x0); beams launched at +-0.5 meet at t = 0.5."""
    data = preset_initial_data("chirp1d")
    m = ConstantSpeed(1.0, 1)
    amp = BranchAmplitude(data, m, Branch.PLUS)
    sa = make_initial_state(data.S, amp, [0.5], order=1, beta=1.0, branch=Branch.PLUS)
    sb = make_initial_state(data.S, amp, [-0.5], order=1, beta=1.0, branch=Branch.PLUS)
    xa = propagate(m, sa, 0.5, tol=1e-10)[-1].x[0]
    xb = propagate(m, sb, 0.5, tol=1e-10)[-1].x[0]
    assert abs(xa - xb) < 1e-9
    assert abs(xa) < 1e-9


def test_preset_radial3d_matches_point_source_data():
    data = preset_initial_data("radial3d")
    m = ConstantSpeed(1.0, 3)
    y = np.array([0.0, 0.5, 0.0])
    from hfbeam.synthesis import split_initial_amplitudes
    ap, am = split_initial_amplitudes(data, m, y)
    a0 = complex(data.A0.value(y[None])[0])
    assert ap == pytest.approx(a0 / 2) and am == pytest.approx(a0 / 2)
    amp = BranchAmplitude(data, m, Branch.PLUS)
    st = make_initial_state(data.S, amp, y, order=1, beta=1.0)
    P = np.outer([0, 1, 0], [0, 1, 0])
    assert np.allclose(st.M, (np.eye(3) - P) / 0.5 + 1j * np.eye(3))


def test_unknown_preset_raises():
    from hfbeam.errors import UnknownPreset
    with pytest.raises(UnknownPreset):
        preset_initial_data("vortex7d")
