"""Trajectories and the model runners driven by a RunConfig."""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import dynamics as dyn
from .. import limits as lm
from ..modes import group_exp
from ..spectral import GridSpec
from .config import RunConfig
from .io import save_snapshot, write_diagnostics, write_json
from .recipes import build_prepared

log = logging.getLogger(__name__)


@dataclass
class Trajectory:
    model: str
    config_hash: str
    eps: float | None = None
    dt: float | None = None
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    filtered: list = field(default_factory=list)     # V(t) for EMTF runs

    def append(self, t, state, diag):
        if self.times and t <= self.times[-1]:
            raise ValueError("trajectory times must increase")
        self.times.append(float(t))
        self.states.append(state)
        self.diagnostics.append(diag)

    def write(self, outdir, params_hash="", save_snapshots=True) -> Path:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        write_diagnostics(outdir / "diagnostics.csv", self.diagnostics)
        files = []
        if save_snapshots:
            for i, (t, s) in enumerate(zip(self.times, self.states)):
                name = f"snapshots/snap_{i:05d}.snap"
                save_snapshot(outdir / name, s, t=t, params_hash=params_hash, config_hash=self.config_hash)
                files.append(name)
        write_json(outdir / "trajectory.json", {
            "model": self.model, "config_hash": self.config_hash, "epsilon": self.eps,
            "dt": self.dt, "times": self.times, "snapshots": files, "extra": self.extra,
            "gol_residual_note": "approximate: time derivative from adjacent steps",
        })
        return outdir


# -- diagnostics -------------------------------------------------------------

def _sym_diag(t, U, eps, params, sigma, gol=math.nan):
    gr = dyn.gauss_residual(U, eps, params)
    x = lm.slm_to_xmhd(U, params, check=False)
    return {"t": t, "l2_norm": U.norm(), "hsigma_norm": U.norm(sigma), "div_B": gr["div_B"],
            "gauss_charge": gr["gauss_charge"], "gauss_charge_resolved": gr["gauss_charge_resolved"],
            "energy": lm.energy(x, params), "gol_residual": gol}


def _xmhd_diag(t, x, params, sigma):
    g = x.grid
    return {"t": t, "l2_norm": x.norm(), "hsigma_norm": x.norm(sigma),
            "div_B": g.norm(g.div(x.B(params))), "gauss_charge": math.nan, "gauss_charge_resolved": math.nan,
            "energy": lm.energy(x, params), "gol_residual": math.nan}


def _plan_steps(T, dt, snapshots):
    """Uniform step dividing T with the snapshot cadence an integer number of steps."""
    if T == 0:
        return 0, dt, 1
    per = max(1, math.ceil(T / (snapshots * dt) - 1e-12))
    nsteps = per * snapshots
    return nsteps, T / nsteps, per


def grid_of(config: RunConfig) -> GridSpec:
    return GridSpec(config.grid, config.dealias_fraction)


def default_slow_dt(prep, config: RunConfig):
    return config.dt if config.dt is not None else dyn.advective_time_step(prep.state, config.plasma, config.cfl)


def emtf_dt(U0, config: RunConfig, eps):
    if config.dt is not None:
        return config.dt
    return min(dyn.advective_time_step(U0, config.plasma, config.cfl),
               dyn.fast_time_step(U0.grid, config.plasma, eps, config.fast_factor))


# -- runners -----------------------------------------------------------------

def run_emtf(config: RunConfig, prep=None, eps=None) -> Trajectory:
    params = config.plasma
    eps = config.epsilon if eps is None else eps
    prep = prep if prep is not None else build_prepared(config.initial, grid_of(config), params)
    U0 = prep.initial_state(eps, params)
    nsteps, h, every = _plan_steps(config.T, emtf_dt(U0, config, eps), config.snapshots)
    traj = Trajectory("emtf", config.digest(), eps, h)
    filt = dyn.spectral_filter_mask(U0.grid) if config.spectral_filter else None
    sigma = config.sigma

    def cb(t, V, V_prev, hh):
        U = group_exp(t / eps, V, params)
        gol = math.nan
        if V_prev is not None:
            U_prev = group_exp((t - hh) / eps, V_prev, params)
            gol = lm.gol_residual(U_prev, U, hh, eps, params)
        traj.append(t, U, _sym_diag(t, U, eps, params, sigma, gol))
        traj.filtered.append(V)

    dyn.integrate_filtered(U0, params, eps, config.T, h if nsteps else 1.0, every, cb, filt)
    traj.extra["nsteps"] = nsteps
    return traj


def run_eslm(config: RunConfig, prep=None, dt=None) -> Trajectory:
    params = config.plasma
    prep = prep if prep is not None else build_prepared(config.initial, grid_of(config), params)
    nsteps, h, every = _plan_steps(config.T, dt or default_slow_dt(prep, config), config.snapshots)
    traj = Trajectory("eslm", config.digest(), None, h)

    def cb(t, U, prev, hh):
        traj.append(t, U, _sym_diag(t, U, 0.0, params, config.sigma))

    lm.integrate_eslm(prep.state, params, config.T, h, cb, every)
    traj.extra["nsteps"] = nsteps
    return traj


def run_xmhd(config: RunConfig, prep=None, dt=None) -> Trajectory:
    params = config.plasma
    prep = prep if prep is not None else build_prepared(config.initial, grid_of(config), params)
    x0 = lm.slm_to_xmhd(prep, params)
    nsteps, h, every = _plan_steps(config.T, dt or default_slow_dt(prep, config), config.snapshots)
    traj = Trajectory("xmhd", config.digest(), None, h)

    def cb(t, x, prev, hh):
        traj.append(t, x, _xmhd_diag(t, x, params, config.sigma))

    lm.integrate_xmhd(x0, params, config.T, h, cb, every)
    traj.extra["nsteps"] = nsteps
    return traj


def run_paired(config: RunConfig, prep=None, dt=None) -> dict:
    """ESLM and XMHD from the same data and step; compared through the bridge."""
    params = config.plasma
    prep = prep if prep is not None else build_prepared(config.initial, grid_of(config), params)
    dt = dt or default_slow_dt(prep, config)
    a = run_eslm(config, prep, dt)
    b = run_xmhd(config, prep, dt)
    diffs = []
    for U, x in zip(a.states, b.states):
        xb = lm.slm_to_xmhd(U, params, check=False)
        diffs.append((xb - x).norm() / max(x.norm(), 1e-300))
    return {"eslm": a, "xmhd": b, "times": a.times, "relative_difference": diffs,
            "max_relative_difference": max(diffs)}


def run(config: RunConfig, outdir=None):
    """Run every trajectory a config describes; write outputs when ``outdir`` is given."""
    params = config.plasma
    prep = build_prepared(config.initial, grid_of(config), params)
    results = {}
    if config.model == "emtf":
        for eps in config.plan():
            results[f"emtf_eps{eps:g}"] = run_emtf(config, prep, eps)
    elif config.model == "eslm":
        results["eslm"] = run_eslm(config, prep)
    elif config.model == "xmhd":
        results["xmhd"] = run_xmhd(config, prep)
    else:
        pair = run_paired(config, prep)
        results["eslm"], results["xmhd"] = pair["eslm"], pair["xmhd"]
        results["comparison"] = {k: pair[k] for k in ("times", "relative_difference", "max_relative_difference")}
    if outdir is not None:
        outdir = Path(outdir)
        write_json(outdir / "config.json", {"config": config.to_dict(), "config_hash": config.digest()})
        for name, tr in results.items():
            if isinstance(tr, Trajectory):
                tr.write(outdir / name, params.digest(), config.save_snapshots)
            else:
                write_json(outdir / f"{name}.json", tr)
    return results


# -- convergence -------------------------------------------------------------

def convergence_study(config: RunConfig, sigmas=None, prep=None) -> dict:
    """sup_t ||V_eps(t) - U_0(t)||_sigma for each eps against one ESLM reference."""
    params = config.plasma
    ladder = sorted(config.plan(), reverse=True)
    if len(ladder) < 2:
        warnings.warn("convergence study with a single epsilon: no ratios reported")
    sigmas = sigmas or sorted({0.0, float(config.sigma)})
    prep = prep if prep is not None else build_prepared(config.initial, grid_of(config), params)
    ref = run_eslm(config, prep)
    rows = []
    try:
        for eps in ladder:
            tr = run_emtf(config, prep, eps)
            if not np.allclose(tr.times, ref.times, rtol=0, atol=1e-12):
                raise RuntimeError("snapshot times of EMTF and ESLM runs differ")
            errs = {}
            for s in sigmas:
                errs[s] = max((V - U0).norm(s) for V, U0 in zip(tr.filtered, ref.states))
            rows.append({"epsilon": eps, "errors": {f"sigma={s:g}": e for s, e in errs.items()},
                         "error": errs[float(config.sigma)], "dt": tr.dt, "nsteps": tr.extra["nsteps"],
                         "max_gauss_charge": max(d["gauss_charge"] for d in tr.diagnostics),
                         "max_gauss_charge_resolved": max(d["gauss_charge_resolved"] for d in tr.diagnostics),
                         "max_div_B": max(d["div_B"] for d in tr.diagnostics),
                         "gauss_charge_initial": tr.diagnostics[0]["gauss_charge"],
                         "div_B_initial": tr.diagnostics[0]["div_B"],
                         "hsigma_norm_initial": tr.diagnostics[0]["hsigma_norm"],
                         "gol_residual_max": max((d["gol_residual"] for d in tr.diagnostics[1:]), default=math.nan)})
            log.info("eps=%g error=%.3e", eps, rows[-1]["error"])
    except Exception as exc:
        return _conv_report(config, rows, ref, failed=f"{type(exc).__name__}: {exc}")
    return _conv_report(config, rows, ref)


def _conv_report(config, rows, ref, failed=None):
    errs = [r["error"] for r in rows]
    ratios = [errs[i] / errs[i + 1] for i in range(len(errs) - 1)]
    slope = None
    if len(rows) >= 2 and all(e > 0 for e in errs):
        slope = float(np.polyfit(np.log([r["epsilon"] for r in rows]), np.log(errs), 1)[0])
    return {
        "config_hash": config.digest(), "sigma": config.sigma, "T": config.T, "grid": config.grid,
        "rows": rows, "ratios": ratios, "fitted_slope": slope,
        "strictly_decreasing": all(errs[i] > errs[i + 1] for i in range(len(errs) - 1)),
        "tolerances": {"min_ratio": 1.5}, "reference_dt": ref.dt, "failed": failed,
    }
