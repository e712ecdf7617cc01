"""Command-line front end: simulate / analyze / validate."""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import dispersion as dsp
from .config_io import parse_config
from .errors import StringModelError
from .experiments import run_experiment, write_outputs
from .params import validate_and_derive
from .reference import (duffing_analytic, duffing_ieq_run,
                        eigenfrequency_convergence, fit_loglog_slope,
                        theta_scheme_convergence)


def _overrides_from(args) -> dict:
    overrides = {}
    for item in args.override or []:
        if "=" not in item:
            raise StringModelError(f"override {item!r} must look like section.key=value")
        key, _, value = item.partition("=")
        overrides[key.strip()] = value.strip()
    if args.oversample is not None:
        overrides["sim.oversampling"] = str(args.oversample)
    return overrides


def cmd_simulate(args) -> int:
    spec = parse_config(args.config, _overrides_from(args))
    out = run_experiment(spec)
    paths = write_outputs(out, args.out)
    print(f"experiment {spec.name}: wrote {len(paths)} files to {args.out}")
    for key in ("n", "h", "k", "n_modes", "theta_u", "theta_v"):
        if key in out.metadata:
            print(f"  {key} = {out.metadata[key]}")
    return 0


def cmd_analyze_dispersion(args) -> int:
    from .config_io import ExperimentSpec
    spec = parse_config(args.config, _overrides_from(args))
    spec = ExperimentSpec(name="dispersion", params=spec.params,
                          sim=spec.sim, source=spec.source)
    out = run_experiment(spec)
    paths = write_outputs(out, args.out)
    print(f"dispersion analysis: wrote {len(paths)} files to {args.out}")
    for key, value in sorted(out.metadata.items()):
        if key.startswith("max_rel_err") or key == "theta_u_tuned":
            print(f"  {key} = {value}")
    return 0


def _check(label: str, ok: bool, detail: str) -> bool:
    print(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
    return ok


def validate_duffing() -> bool:
    ok = True
    for gamma in (0.6, 0.8, 1.0):
        ks = 0.01 / 2.0 ** np.arange(7)
        qs = []
        for k in ks:
            n_e = int(round(0.4 / k))
            u, _ = duffing_ieq_run(3.7, gamma, k, 0.4)
            qs.append(duffing_analytic(n_e * k, 3.7, gamma) - u[n_e])
        slope = fit_loglog_slope(ks, qs)
        ok &= _check(f"cubic-oscillator order, gamma={gamma}",
                     abs(slope - 2.0) <= 0.15, f"slope {slope:.3f}")
    return ok


def validate_theta() -> bool:
    prm = validate_and_derive(rho=8000, E=2e11, T0=50, L=1.0, r=0.2e-3)
    ok = True
    for theta in (0.6, 0.8, 1.0):
        s, errs = eigenfrequency_convergence(prm, theta,
                                             [3200, 6400, 12800, 25600])
        slopes = [fit_loglog_slope(s, errs[:, m]) for m in range(4)]
        ok &= _check(f"eigenfrequency order, theta_u={theta}",
                     all(abs(x - 2.0) <= 0.15 for x in slopes),
                     "slopes " + " ".join(f"{x:.3f}" for x in slopes))
        res = theta_scheme_convergence(prm, theta, [100, 200, 400, 800])
        print(f"       pointwise |Q| slopes (informational), theta_u={theta}: "
              f"h {res.slope_h:.2f} k {res.slope_k:.2f} s {res.slope_s:.2f}")
    return ok


def validate_energy() -> bool:
    from .energy import discrete_energy, energy_error_series
    from .operators import SpatialOperators
    from .stepper import Simulation

    prm = validate_and_derive(rho=8000, E=2e11, T0=50, L=1.0,
                              r=0.2e-3).without_stiffness()
    k = 1.0 / 48000.0
    n = int(np.floor(prm.L / (1.5 * prm.c_u * k)))
    ops = SpatialOperators.build(n, prm.L, 6)
    x = ops.interior_x
    u0 = np.where(np.abs(x - 0.5) <= 0.1,
                  0.5 * 5e-3 * (1.0 + np.cos(np.pi * (x - 0.5) / 0.1)), 0.0)
    driver = Simulation(prm, ops, k, losses_on=False)
    state = driver.initial_state(u0=u0)
    totals = [discrete_energy(state, ops, prm).total]
    for _ in range(48000):
        state = driver.step_once(state)
        totals.append(discrete_energy(state, ops, prm).total)
    eps = np.abs(energy_error_series(np.array(totals))).max()
    return _check("lossless nonlinear energy drift, 1 s at 48 kHz",
                  eps <= 1e-11, f"max|eps| = {eps:.3e}")


def validate_implicit() -> bool:
    prm = validate_and_derive(rho=8000, E=2e11, T0=40, L=1.0, r=0.3e-3)
    k = 1.0 / 48000.0
    n_exp = int(np.floor(prm.L / dsp.stability_grid_spacing(prm, k, 1.0)))
    n_imp = int(np.floor(prm.L / dsp.implicit_limit_spacing(prm, k)))
    n_modes = int(np.floor(dsp.count_transverse_modes(prm, k)))
    ok = _check("explicit grid points", n_exp == 168, f"{n_exp}")
    ok &= _check("implicit grid points", n_imp == 360, f"{n_imp}")
    print(f"       transverse modes below Nyquist: {n_modes}")
    from .operators import SpatialOperators
    ops_exp = SpatialOperators.build(n_exp, prm.L, 1)
    ops_imp = SpatialOperators.build(n_imp, prm.L, 1)
    om_exp = dsp.numerical_eigenfrequencies_transverse(ops_exp, prm, 1.0, k)
    om_imp = dsp.implicit_scheme_eigenfrequencies(ops_imp, prm, k)
    n_cmp = min(len(om_exp), len(om_imp))
    exact = dsp.analytic_transverse_eigenfrequencies(prm, n_cmp)
    err_exp = np.abs(om_exp[:n_cmp] - exact)
    err_imp = np.abs(om_imp[:n_cmp] - exact)
    band = exact <= 2 * np.pi * 20e3
    ok &= _check("explicit dispersion error below implicit across the band",
                 bool(np.max(err_exp[band]) < np.max(err_imp[band])),
                 f"max explicit {np.max(err_exp[band]):.4g} rad/s vs "
                 f"implicit {np.max(err_imp[band]):.4g} rad/s")
    return ok


def cmd_validate(args) -> int:
    table = {"duffing": validate_duffing, "theta": validate_theta,
             "energy": validate_energy, "implicit": validate_implicit}
    return 0 if table[args.what]() else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlstring",
        description="Nonlinear stiff-string simulation with a "
                    "linearly-implicit energy-conserving scheme")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run an experiment from a config file")
    sim.add_argument("config")
    sim.add_argument("--out", default="out")
    sim.add_argument("--oversample", type=int, default=None)
    sim.add_argument("--override", action="append", metavar="section.key=value")
    sim.set_defaults(func=cmd_simulate)

    ana = sub.add_parser("analyze", help="analysis without time stepping")
    ana_sub = ana.add_subparsers(dest="what", required=True)
    disp = ana_sub.add_parser("dispersion")
    disp.add_argument("config")
    disp.add_argument("--out", default="out")
    disp.add_argument("--oversample", type=int, default=None)
    disp.add_argument("--override", action="append", metavar="section.key=value")
    disp.set_defaults(func=cmd_analyze_dispersion)

    val = sub.add_parser("validate", help="run a built-in validation study")
    val.add_argument("what", choices=["duffing", "theta", "energy", "implicit"])
    val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StringModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
