"""Command line entry point: ``bosekinetic <subcommand> [--config FILE] [--out DIR]``."""
from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from .config import RunConfig, explicit_initial_data, load_config
from .core import ConfigurationError, ModelParams
from .driver import (Model, SimulationAborted, decay_fit, energy_identity_check, picard_solve,
                     prepare_initial_data, random_initial_data, simulate)
from .spectral import DiscretizationError, operator_report, spectral_report
from .wave import ContractionError


def _config(args) -> RunConfig:
    return load_config(args.config) if args.config else RunConfig(params=ModelParams())


def _initial(model: Model, rc: RunConfig):
    raw = explicit_initial_data(rc, model.grid)
    if raw is None:
        raw = random_initial_data(model, rc.amp_R, rc.amp_Phi, seed=rc.seed, max_mode=rc.max_mode)
    R, Phi, corr = prepare_initial_data(raw[0], raw[1], rc.params, model.basis)
    return R, Phi, corr


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def _emit(summary: dict, out: Path | None, name: str) -> None:
    text = json.dumps(_jsonable(summary), indent=2)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)
    print(text)


def _orders(values):
    v = np.asarray(values, dtype=float)
    return [float(math.log2(a / b)) if a > 0 and b > 0 else None for a, b in zip(v[:-1], v[1:])]


def cmd_verify(args, rc: RunConfig, model: Model) -> bool:
    rep = operator_report(model.tables, model.basis)
    _emit(rep, args.out, "operators.json")
    return rep["passed"]


def cmd_simulate(args, rc: RunConfig, model: Model) -> bool:
    R, Phi, corr = _initial(model, rc)
    try:
        res = simulate(model, R, Phi, rc.T_final, dt=rc.dt, mode=rc.mode,
                       sample_every=rc.sample_every, mass_tol=rc.mass_tol, eta=rc.eta,
                       picard_tol=rc.picard_tol)
        series, flags, reports = res.series, res.flags, res.picard
        aborted = None
    except SimulationAborted as exc:
        series, flags, reports, aborted = exc.series, {"aborted": True}, [], str(exc)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        series.to_csv(args.out / "diagnostics.csv")
    try:
        fit = decay_fit(series["t"], series["R_sum"])
        series.zeta_hat = fit.zeta_hat
    except ValueError:
        fit = None
    spectral = spectral_report(model.tables, model.basis)
    summary = {"flags": flags, "aborted": aborted, "corrections": corr,
               "zeta_hat": None if fit is None else fit.zeta_hat,
               "decay_r2": None if fit is None else fit.r2,
               "c_hat": spectral["c_hat"], "nu0_hat": spectral["nu0_hat"], "nu1_hat": spectral["nu1_hat"],
               "kappa": spectral["kappa"],
               "contraction_factors": [f for r in reports for f in r.factors],
               "max_mass_drift": float(np.abs(series["mass_drift"]).max()),
               "max_alpha": float(series["alpha"].max())}
    _emit(summary, args.out, "summary.json")
    return aborted is None and all(v for k, v in flags.items() if k != "small_data")


def cmd_picard(args, rc: RunConfig, model: Model) -> bool:
    R, Phi, _ = _initial(model, rc)
    p = rc.params
    T = args.window or 1.0 / (10 * p.g * p.n0)
    dt = rc.dt or min(model.default_dt(), T / 20)
    try:
        _, rep = picard_solve(model, Phi.coeffs, R.modes, T, dt, tol=rc.picard_tol)
    except ContractionError as exc:
        _emit({"converged": False, "error": str(exc)}, args.out, "picard.json")
        return False
    later = rep.factors[1:]
    ok = rep.converged and all(f < 0.5 for f in later)
    _emit({**rep.as_dict(), "max_factor_after_first": max(later, default=0.0), "passed": ok},
          args.out, "picard.json")
    return ok


def cmd_decay(args, rc: RunConfig, model: Model) -> bool:
    gammas = [float(x) for x in args.gammas.split(",")]
    rows = []
    for gam in gammas:
        params = rc.params.with_(gamma=gam)
        m = Model.build(params, rc.cache_dir)
        R, Phi, _ = _initial(m, RunConfig(**{**rc.__dict__, "params": params}))
        T = args.horizon / gam
        res = simulate(m, R, Phi, T, dt=rc.dt, sample_every=rc.sample_every, mass_tol=rc.mass_tol,
                       eta=rc.eta)
        fit = decay_fit(res.series["t"], res.series["R_sum"])
        rows.append({"gamma": gam, "zeta_hat": fit.zeta_hat, "r2": fit.r2,
                     "zeta_over_gamma": fit.zeta_hat / gam, "window": fit.window,
                     "K_alpha": float(res.series["alpha"].max()) / gam**2})
    ratios = [r["zeta_over_gamma"] for r in rows]
    spread = max(ratios) / min(ratios) - 1.0
    ok = all(r["r2"] > 0.99 and r["zeta_hat"] > 0 for r in rows) and spread <= 0.25
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        with open(args.out / "decay.csv", "w") as fh:
            fh.write("gamma,zeta_hat,r2,zeta_over_gamma\n")
            for r in rows:
                fh.write(f"{r['gamma']!r},{r['zeta_hat']!r},{r['r2']!r},{r['zeta_over_gamma']!r}\n")
    _emit({"rows": rows, "linearity_spread": spread, "passed": ok}, args.out, "decay.json")
    return ok


def cmd_energy(args, rc: RunConfig, model: Model) -> bool:
    R, Phi, _ = _initial(model, rc)
    dt0 = rc.dt or model.default_dt()
    res_a, res_e, drift = [], [], []
    for j in range(args.levels):
        dt = dt0 / 2**j
        r = simulate(model, R, Phi, rc.T_final, dt=dt, mass_tol=rc.mass_tol, eta=rc.eta, store=True)
        e = energy_identity_check(model, r.trajectory)
        res_a.append(e["max_alpha"])
        res_e.append(e["max_energy"])
        drift.append(float(np.abs(r.series["mass_drift"]).max()))
    oa, oe = _orders(res_a), _orders(res_e)
    ok = all(o is not None and o > 1.7 for o in oa + oe)
    _emit({"dt": [dt0 / 2**j for j in range(args.levels)], "alpha_residual": res_a,
           "energy_residual": res_e, "alpha_orders": oa, "energy_orders": oe,
           "mass_drift": drift, "passed": ok}, args.out, "energy.json")
    return ok


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bosekinetic", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    specs = {
        "verify-operators": (cmd_verify, "structural checks of the collision operators"),
        "simulate": (cmd_simulate, "coupled run with diagnostics CSV and JSON summary"),
        "picard-check": (cmd_picard, "contraction report for one Picard window"),
        "decay-scan": (cmd_decay, "decay-rate fits across gamma values"),
        "energy-audit": (cmd_energy, "energy identity residuals under dt halving"),
    }
    for name, (fn, help_) in specs.items():
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", type=Path, help="INI configuration file")
        sp.add_argument("--out", type=Path, help="output directory")
        sp.set_defaults(func=fn)
        if name == "picard-check":
            sp.add_argument("--window", type=float, help="window length (default 1/(10 g n0))")
        if name == "decay-scan":
            sp.add_argument("--gammas", default="0.02,0.04,0.08")
            sp.add_argument("--horizon", type=float, default=16.0,
                            help="run length in units of 1/gamma")
        if name == "energy-audit":
            sp.add_argument("--levels", type=int, default=3)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        rc = _config(args)
        model = Model.build(rc.params, rc.cache_dir)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            ok = args.func(args, rc, model)
    except (ConfigurationError, DiscretizationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
