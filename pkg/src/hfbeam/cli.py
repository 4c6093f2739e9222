"""Command-line harness: reproducible runs with JSON configs.

Commands: propagate, superpose, eulerian, convergence, spherical-example.
Every run writes a manifest.json (config echo, version, engine, wall time)
next to its CSV artifacts; numeric CSV bodies are byte-identical across reruns
of the same config on the same engine.  Exit codes: 0 ok, 2 config error,
3 numerical failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .beams import propagate
from .errors import CFLViolation, ConfigError, HfbeamError, UnknownPreset
from .medium import Branch, medium_from_config
from .phasespace import PhaseGrid, advance, eulerian_superpose, init_bundle, reconstruct_hessian
from .presets import preset_initial_data, radial3d_profile
from .synthesis import (SuperpositionConfig, launch_families,
                        make_eval_grid, superpose, superpose_at_points)
from .validation import ConvergenceProblem, Spherical3D, convergence_study
from .beams import make_initial_state
from .synthesis import BranchAmplitude

FMT = "%.17g"


def _fmt(x) -> str:
    return FMT % float(x)


def write_csv(path: Path, comments: list[str], colnames: list[str], rows):
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(colnames))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def write_manifest(out: Path, command: str, cfg: dict, wall: float):
    manifest = {
        "command": command,
        "config": cfg,
        "version": __version__,
        "engine": kernels.engine(),
        "wall_time_s": wall,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# config handling

_COMMON_KEYS = {"medium", "initial_data", "epsilon", "epsilons", "beta", "order",
                "T", "output_times", "mode", "out_dir", "seed", "tol", "h0"}
_COMMAND_KEYS = {
    "propagate": _COMMON_KEYS | {"x0", "branch"},
    "superpose": _COMMON_KEYS | {"t", "grid", "ntheta"},
    "eulerian": _COMMON_KEYS | {"t", "phase_grid", "eta_cells", "dt"},
    "convergence": _COMMON_KEYS | {"oracle", "nt", "bands", "ntheta"},
    "spherical-example": _COMMON_KEYS | {"t", "tilt", "support"},
}


def load_config(path: str | None, overrides: dict, command: str) -> dict:
    cfg = {}
    if path:
        with open(path) as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise ConfigError("config root must be a JSON object")
    for k, v in overrides.items():
        if v is not None:
            cfg[k] = v
    unknown = set(cfg) - _COMMAND_KEYS[command]
    if unknown:
        raise ConfigError(f"unknown config keys for {command}: {sorted(unknown)}")
    _validate_physics(cfg)
    return cfg


def _validate_physics(cfg: dict):
    eps_vals = []
    if "epsilon" in cfg:
        eps_vals.append(cfg["epsilon"])
    if "epsilons" in cfg:
        eps_vals.extend(cfg["epsilons"])
    for e in eps_vals:
        if not (isinstance(e, (int, float)) and e > 0):
            raise ConfigError(f"epsilon must be positive, got {e!r}")
    if "beta" in cfg and not (isinstance(cfg["beta"], (int, float)) and cfg["beta"] > 0):
        raise ConfigError(f"beta must be positive, got {cfg['beta']!r}")
    if "order" in cfg and cfg["order"] not in (1, 2):
        raise ConfigError(f"order must be 1 or 2 (supported beam orders), got {cfg['order']!r}")
    if "T" in cfg and not (isinstance(cfg["T"], (int, float)) and cfg["T"] >= 0):
        raise ConfigError(f"T must be nonnegative, got {cfg['T']!r}")


def _medium(cfg):
    return medium_from_config(cfg.get("medium", {"kind": "constant", "c0": 1.0, "n": 1}))


def _data(cfg):
    ic = cfg.get("initial_data", {"preset": "plane1d"})
    if "preset" not in ic:
        raise ConfigError("initial_data needs a 'preset' key")
    extra = set(ic) - {"preset", "params"}
    if extra:
        raise ConfigError(f"unknown initial_data keys: {sorted(extra)}")
    return preset_initial_data(ic["preset"], ic.get("params"))


def _out_dir(cfg) -> Path:
    out = Path(cfg.get("out_dir", "runs/out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# commands

def cmd_propagate(cfg: dict) -> None:
    medium = _medium(cfg)
    data = _data(cfg)
    eps = cfg.get("epsilon", 0.01)
    beta = cfg.get("beta", 1.0)
    order = cfg.get("order", 1)
    T = cfg.get("T", 1.0)
    branch = Branch.PLUS if cfg.get("branch", "plus") == "plus" else Branch.MINUS
    x0 = np.asarray(cfg.get("x0", [float(np.mean([data.support_lo[0], data.support_hi[0]]))]),
                    dtype=float)
    times = cfg.get("output_times") or list(np.linspace(0.0, T, 11))
    amp = BranchAmplitude(data, medium, branch)
    s0 = make_initial_state(data.S, amp, x0, order=order, beta=beta, branch=branch)
    states = propagate(medium, s0, T, tol=cfg.get("tol", 1e-8), output_times=times)

    n = s0.n
    cols = (["t"] + [f"x{i}" for i in range(n)] + [f"p{i}" for i in range(n)] + ["S"]
            + [f"reM{i}{j}" for i in range(n) for j in range(i, n)]
            + [f"imM{i}{j}" for i in range(n) for j in range(i, n)]
            + ["reA", "imA"])
    rows = []
    for st in states:
        triu = [(i, j) for i in range(n) for j in range(i, n)]
        rows.append([st.t, *st.x, *st.p, st.S,
                     *[st.M[i, j].real for i, j in triu],
                     *[st.M[i, j].imag for i, j in triu],
                     st.A.real, st.A.imag])
    out = _out_dir(cfg)
    write_csv(out / "trajectory.csv",
              [f"eps={_fmt(eps)}", f"beta={_fmt(beta)}", f"order={order}",
               f"branch={branch.name}"],
              cols, rows)


def _write_wavefield(out: Path, name: str, wf, cfg_s: SuperpositionConfig, extra=()):
    pts = wf.grid.points()
    n = pts.shape[1]
    cols = [f"y{i}" for i in range(n)] + ["reu", "imu", "reut", "imut"]
    rows = np.column_stack([pts, wf.u.real, wf.u.imag, wf.ut.real, wf.ut.imag])
    comments = [f"t={_fmt(wf.t)}", f"eps={_fmt(cfg_s.eps)}", f"beta={_fmt(cfg_s.beta)}",
                f"order={cfg_s.order}", *extra]
    bs = wf.meta.get("branch_sizes")
    if bs:
        comments.append("branches=" + ",".join(f"{k}:{v}" for k, v in sorted(bs.items())))
    write_csv(out / name, comments, cols, rows)


def cmd_superpose(cfg: dict) -> None:
    medium = _medium(cfg)
    data = _data(cfg)
    eps = cfg.get("epsilon", 0.01)
    scfg = SuperpositionConfig(eps=eps, beta=cfg.get("beta", 1.0),
                               order=cfg.get("order", 1), n=data.n,
                               h0=cfg.get("h0"))
    t = cfg.get("t", 0.0)
    fams = launch_families(data, medium, scfg)
    if t != 0.0:
        from .beams import propagate_family
        fams = [propagate_family(medium, f, [t], tol=cfg.get("tol", 1e-8))[0]
                if f.size else f for f in fams]
    grid = make_eval_grid(data, medium, scfg, t, cfg.get("grid"),
                          ntheta=cfg.get("ntheta", 96))
    wf = superpose(fams, scfg, medium, grid)
    out = _out_dir(cfg)
    _write_wavefield(out, "wavefield.csv", wf, scfg)


def cmd_eulerian(cfg: dict) -> None:
    medium = _medium(cfg)
    data = _data(cfg)
    if data.n != 1:
        raise ConfigError("the eulerian pipeline supports n = 1 only")
    eps = cfg.get("epsilon", 0.01)
    scfg = SuperpositionConfig(eps=eps, beta=cfg.get("beta", 1.0), order=1, n=1)
    t = cfg.get("t", 0.5)
    pg = cfg.get("phase_grid")
    if pg is None:
        raise ConfigError("eulerian runs need a phase_grid config "
                          "{x_range, p_range, nx, np}")
    extra = set(pg) - {"x_range", "p_range", "nx", "np"}
    if extra:
        raise ConfigError(f"unknown phase_grid keys: {sorted(extra)}")
    out = _out_dir(cfg)
    bundles = []
    for branch in (Branch.PLUS, Branch.MINUS):
        grid = PhaseGrid(pg["x_range"][0], pg["x_range"][1], int(pg["nx"]),
                         pg["p_range"][0], pg["p_range"][1], int(pg["np"]),
                         branch)
        b = init_bundle(grid, data, medium)
        b = advance(medium, b, t, dt=cfg.get("dt"))
        bundles.append(b)
        M = reconstruct_hessian(b)
        X, P = grid.mesh()
        rows = np.column_stack([X.ravel(), P.ravel(), b.phi1.ravel(), b.w.ravel(),
                                b.S.ravel(), b.A.real.ravel(), b.A.imag.ravel(),
                                M.real.ravel(), M.imag.ravel()])
        write_csv(out / f"bundle_{branch.name.lower()}.csv",
                  [f"t={_fmt(b.t)}", f"eps={_fmt(eps)}"],
                  ["x", "p", "phi1", "w", "S", "reA", "imA", "reM", "imM"], rows)
    grid = make_eval_grid(data, medium, scfg, t, None)
    wf = eulerian_superpose(bundles, scfg, medium, grid,
                            eta_cells=cfg.get("eta_cells", 3.0))
    _write_wavefield(out, "wavefield.csv", wf, scfg, extra=["pipeline=eulerian"])


def cmd_convergence(cfg: dict) -> None:
    medium = _medium(cfg)
    data = _data(cfg)
    eps_list = cfg.get("epsilons")
    if not eps_list:
        eps_list = [1 / 25, 1 / 50, 1 / 100, 1 / 200, 1 / 400] if data.n == 1 \
            else [1 / 25, 1 / 50, 1 / 100, 1 / 250]
    oracle = cfg.get("oracle")
    if oracle is None:
        if data.n == 2:
            oracle = "hankel2d"
        elif medium.kind == "constant":
            oracle = "dalembert"
        else:
            oracle = "fd"
    prob = ConvergenceProblem(medium=medium, data=data, T=cfg.get("T", 0.5),
                              oracle=oracle, beta=cfg.get("beta", 1.0), n=data.n,
                              h0=cfg.get("h0"), ntheta=cfg.get("ntheta", 96))
    rep = convergence_study(prob, eps_list, order=cfg.get("order", 1),
                            mode=cfg.get("mode", "lagrangian"),
                            nt=cfg.get("nt", 6))
    out = _out_dir(cfg)
    rows = []
    for i, eps in enumerate(rep.eps_list):
        resid = rep.residuals[i][-1] if rep.residuals[i] else float("nan")
        lhs = rep.lemma_lhs[i][-1] if rep.lemma_lhs else float("nan")
        rhs = rep.lemma_rhs[i][-1] if rep.lemma_rhs else float("nan")
        rows.append([eps, rep.e0_E[i], rep.eT_E[i], resid, lhs, rhs])
    write_csv(out / "conv_report.csv",
              [f"T={_fmt(prob.T)}", f"order={cfg.get('order', 1)}", f"oracle={oracle}",
               f"mode={cfg.get('mode', 'lagrangian')}"],
              ["eps", "e0_E", "eT_E", "residual_L2", "lemma31_lhs", "lemma31_rhs"],
              rows)
    summary = rep.summary()
    bands = cfg.get("bands") or {}
    if "energy" in bands:
        lo, hi = bands["energy"]
        summary["energy_band"] = [lo, hi]
        summary["energy_band_pass"] = bool(lo <= summary["slope_energy_final"] <= hi)
    if "residual" in bands and summary.get("slope_residual") is not None:
        lo, hi = bands["residual"]
        summary["residual_band"] = [lo, hi]
        summary["residual_band_pass"] = bool(lo <= summary["slope_residual"] <= hi)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def cmd_spherical_example(cfg: dict) -> None:
    medium = _medium(cfg)
    if medium.kind != "constant" or medium.n != 3:
        medium = medium_from_config({"kind": "constant", "c0": 1.0, "n": 3})
    eps_list = cfg.get("epsilons") or [1 / 25, 1 / 50, 1 / 100]
    if "epsilon" in cfg:
        eps_list = [cfg["epsilon"]]
    t = cfg.get("t", 0.5)
    beta = cfg.get("beta", 3.0)
    tilt = cfg.get("tilt", 12.0)
    support = tuple(cfg.get("support", (0.3, 0.7)))
    data = preset_initial_data("radial3d", {"support": support, "tilt": tilt})
    profile = radial3d_profile({"support": support, "tilt": tilt})

    from .beams import propagate_family
    rows = []
    prev = None
    for eps in eps_list:
        scfg = SuperpositionConfig(eps=eps, beta=beta, order=1, n=3,
                                   h0=min(np.sqrt(eps / beta), (support[1] * 2) / 16.0))
        fams = launch_families(data, medium, scfg)
        fams = [propagate_family(medium, f, [t], tol=cfg.get("tol", 1e-8))[0]
                if f.size else f for f in fams]
        u, _, _ = superpose_at_points(fams, scfg, medium, np.zeros((1, 3)))
        exact = Spherical3D(profile, eps)
        gp = exact.caustic_value(t)
        diff = abs(complex(u[0]) - gp)
        ratio = (prev / (eps * diff)) if prev is not None else float("nan")
        rows.append([eps, complex(u[0]).real, complex(u[0]).imag,
                     gp.real, gp.imag, diff, eps * diff, ratio])
        prev = eps * diff
    out = _out_dir(cfg)
    write_csv(out / "caustic_table.csv",
              [f"t={_fmt(t)}", f"beta={_fmt(beta)}", f"tilt={_fmt(tilt)}",
               f"support={_fmt(support[0])}:{_fmt(support[1])}"],
              ["eps", "re_ugb", "im_ugb", "re_gprime", "im_gprime",
               "abs_diff", "eps_x_absdiff", "decay_ratio"], rows)


_COMMANDS = {
    "propagate": cmd_propagate,
    "superpose": cmd_superpose,
    "eulerian": cmd_eulerian,
    "convergence": cmd_convergence,
    "spherical-example": cmd_spherical_example,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hfbeam",
        description="Gaussian beam superposition pipelines for the acoustic wave equation")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--eps", type=float, help="override epsilon")
    parser.add_argument("--t", type=float, dest="t", help="override evaluation time")
    parser.add_argument("--T", type=float, dest="T", help="override time horizon")
    parser.add_argument("--order", type=int, help="beam order (1 or 2)")
    parser.add_argument("--beta", type=float, help="initial Hessian imaginary part")
    parser.add_argument("--mode", choices=["lagrangian", "eulerian"])
    parser.add_argument("--out", help="output directory")
    args = parser.parse_args(argv)

    overrides = {"epsilon": args.eps, "t": args.t, "T": args.T, "order": args.order,
                 "beta": args.beta, "mode": args.mode, "out_dir": args.out}
    t0 = time.time()
    try:
        cfg = load_config(args.config, overrides, args.command)
    except (ConfigError, UnknownPreset, json.JSONDecodeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4
    try:
        _COMMANDS[args.command](cfg)
        write_manifest(_out_dir(cfg), args.command, cfg, time.time() - t0)
    except (ConfigError, UnknownPreset) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CFLViolation as exc:
        print(f"numerical failure (CFL): {exc}", file=sys.stderr)
        return 3
    except HfbeamError as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
