"""Command line entry point: run, converge, verify, prepare, bridge, diag.

Exit codes: 0 pass, 1 run failure, 2 verification failure, 3 config error.
Outputs go under --out, else $EMTF_OUTPUT_ROOT/<name>, else ./emtf_output/<name>.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

from .. import limits as lm
from ..dynamics import InstabilityError
from ..modes import PreconditionError
from ..plasma import PlasmaParams, VacuumError
from ..spectral import GridMismatchError
from .config import ConfigError, RunConfig, build_config, load_config
from .io import SnapshotError, load_snapshot, read_diagnostics, save_snapshot, write_json
from .runs import convergence_study, run
from .verify import verify_suite

EXIT_OK, EXIT_RUN, EXIT_VERIFY, EXIT_CONFIG = 0, 1, 2, 3
OUTPUT_ENV = "EMTF_OUTPUT_ROOT"

log = logging.getLogger("emtf")


def output_dir(args, name) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    return Path(os.environ.get(OUTPUT_ENV, "emtf_output")) / name


def _config(args) -> RunConfig:
    if getattr(args, "config", None):
        return load_config(args.config, args.override)
    return build_config(_overrides_only(args.override))


def _overrides_only(overrides):
    from .config import apply_overrides
    return apply_overrides({}, overrides)


def cmd_run(args):
    cfg = _config(args)
    out = output_dir(args, f"run_{cfg.digest()}")
    res = run(cfg, out)
    summary = {"output": str(out), "config_hash": cfg.digest(), "trajectories": sorted(res)}
    if "comparison" in res:
        summary["max_relative_difference"] = res["comparison"]["max_relative_difference"]
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_converge(args):
    cfg = _config(args)
    if not cfg.epsilon_ladder:
        raise ConfigError("converge needs an epsilon_ladder")
    rep = convergence_study(cfg)
    out = output_dir(args, f"converge_{cfg.digest()}")
    write_json(out / "convergence.json", rep)
    for r in rep["rows"]:
        print(f"eps={r['epsilon']:<8g} error={r['error']:.6e}")
    print(f"ratios={['%.3f' % x for x in rep['ratios']]} slope={rep['fitted_slope']}")
    if rep["failed"]:
        print(f"run failure: {rep['failed']}", file=sys.stderr)
        return EXIT_RUN
    ok = rep["strictly_decreasing"] and all(x >= rep["tolerances"]["min_ratio"] for x in rep["ratios"])
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_verify(args):
    params = _config(args).plasma if args.config or args.override else PlasmaParams()
    rep = verify_suite(params, args.kmax, inject_fault=args.fault, seed=args.seed,
                       mean_value=not args.skip_mean_value)
    out = output_dir(args, "verify")
    write_json(out / "verify.json", rep)
    for name, c in rep["checks"].items():
        print(f"{'PASS' if c['pass'] else 'FAIL'} {name}")
    return EXIT_OK if rep["pass"] else EXIT_VERIFY


def cmd_prepare(args):
    params = _config(args).plasma
    snap = load_snapshot(args.inp)
    if snap.basis != "raw":
        raise SnapshotError(f"{args.inp}: prepare expects raw velocities, found {snap.basis!r}")
    spec = snap.to_state()
    prep = lm.prepare_data(spec[0:3], spec[3:6], args.nbar0, params, snap.grid)
    save_snapshot(args.out, prep.state, t=snap.header["t"], params_hash=params.digest())
    return EXIT_OK


def cmd_bridge(args):
    params = _config(args).plasma
    snap = load_snapshot(args.inp)
    state = snap.to_state()
    if args.dir == "slm2xmhd":
        if snap.basis != "sym":
            raise SnapshotError("slm2xmhd expects a symmetrised prepared state")
        out = lm.slm_to_xmhd(state, params)
    else:
        if snap.basis != "xmhd":
            raise SnapshotError("xmhd2slm expects an XMHD snapshot")
        out = lm.xmhd_to_slm(state, params, args.nbar0).state
    save_snapshot(args.out, out, t=snap.header["t"], params_hash=params.digest())
    return EXIT_OK


def cmd_diag(args):
    d = Path(args.traj)
    rows = read_diagnostics(d / "diagnostics.csv")
    meta = json.loads((d / "trajectory.json").read_text()) if (d / "trajectory.json").exists() else {}

    def finite(col):
        return [r[col] for r in rows if not math.isnan(r[col])]

    e = finite("energy")
    summary = {
        "model": meta.get("model"), "config_hash": meta.get("config_hash"), "n_rows": len(rows),
        "t_final": rows[-1]["t"] if rows else None,
        "max_div_B": max(finite("div_B"), default=None),
        "max_gauss_charge": max(finite("gauss_charge"), default=None),
        "relative_energy_drift": (abs(e[-1] - e[0]) / abs(e[0]) if e and e[0] else None),
        "max_gol_residual": max(finite("gol_residual"), default=None),
    }
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="emtf", description="Two-fluid Euler-Maxwell low-frequency limit toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=False):
        sp.add_argument("--config", required=config_required)
        sp.add_argument("--override", action="append", default=[], metavar="KEY=VAL")
        sp.add_argument("--out")

    sp = sub.add_parser("run", help="integrate the configured model")
    common(sp, True)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("converge", help="epsilon-ladder convergence study")
    common(sp, True)
    sp.set_defaults(func=cmd_converge)

    sp = sub.add_parser("verify", help="projector and group oracle suite")
    common(sp)
    sp.add_argument("--kmax", type=int, default=8)
    sp.add_argument("--fault", choices=["w3_sign"])
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--skip-mean-value", action="store_true")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("prepare", help="project raw velocities onto prepared data")
    common(sp)
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--nbar0", type=float, default=0.0)
    sp.set_defaults(func=cmd_prepare)

    sp = sub.add_parser("bridge", help="map between ESLM and XMHD variables")
    common(sp)
    sp.add_argument("--dir", choices=["slm2xmhd", "xmhd2slm"], required=True)
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--nbar0", type=float, default=0.0)
    sp.set_defaults(func=cmd_bridge)

    sp = sub.add_parser("diag", help="summarise a trajectory directory")
    sp.add_argument("--traj", required=True)
    sp.set_defaults(func=cmd_diag)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command in ("prepare", "bridge") and not args.out:
        parser.error("--out is required")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InstabilityError, VacuumError, PreconditionError, SnapshotError, GridMismatchError,
            OSError, ValueError) as exc:
        print(f"run failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUN


if __name__ == "__main__":
    sys.exit(main())
